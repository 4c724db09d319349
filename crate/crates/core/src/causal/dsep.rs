//! d-separation by reachability ("Bayes ball").

use super::dag::{bits, Dag};
use crate::{Error, Result};

/// Whether `x` and `y` are d-separated given `z`.
pub fn d_separated(dag: &Dag, x: &str, y: &str, z: &[&str]) -> Result<bool> {
    let (xi, yi) = (dag.index(x)?, dag.index(y)?);
    if xi == yi {
        return Err(Error::InvalidStatement(format!("d-separation of `{x}` from itself")));
    }
    let zmask = dag.mask_of(z)?;
    if zmask & ((1 << xi) | (1 << yi)) != 0 {
        return Err(Error::InvalidStatement(format!(
            "`{x}` or `{y}` is in the conditioning set"
        )));
    }
    Ok(d_separated_idx(dag, xi, yi, zmask))
}

/// Index form of [`d_separated`]; `x`, `y` must not be in `zmask`.
pub fn d_separated_idx(dag: &Dag, x: usize, y: usize, zmask: u64) -> bool {
    reachable(dag, x, zmask) & (1 << y) == 0
}

/// Nodes d-connected to `x` given `zmask`.
///
/// A trail enters a node either from a child (travelling up) or from a
/// parent (travelling down). Non-colliders pass unless observed; a collider
/// (entered from a parent, leaving to a parent) passes only if it or one of
/// its descendants is observed.
pub fn reachable(dag: &Dag, x: usize, zmask: u64) -> u64 {
    let n = dag.len();
    let children: Vec<u64> = (0..n).map(|v| dag.child_mask(v)).collect();
    let open_colliders = dag.ancestors_mask(zmask);

    let mut seen_up = 0u64;
    let mut seen_down = 0u64;
    let mut stack: Vec<(usize, bool)> = vec![(x, true)];
    let mut result = 0u64;
    while let Some((v, up)) = stack.pop() {
        let bit = 1u64 << v;
        let seen = if up { &mut seen_up } else { &mut seen_down };
        if *seen & bit != 0 {
            continue;
        }
        *seen |= bit;
        let observed = zmask & bit != 0;
        if !observed {
            result |= bit;
        }
        if up {
            if !observed {
                stack.extend(bits(dag.parent_mask(v)).map(|p| (p, true)));
                stack.extend(bits(children[v]).map(|c| (c, false)));
            }
        } else {
            if !observed {
                stack.extend(bits(children[v]).map(|c| (c, false)));
            }
            if open_colliders & bit != 0 {
                stack.extend(bits(dag.parent_mask(v)).map(|p| (p, true)));
            }
        }
    }
    result & !(1 << x)
}
