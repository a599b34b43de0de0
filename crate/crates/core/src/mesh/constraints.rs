use std::collections::{BTreeMap, BTreeSet};

use super::{BoundaryRole, Mesh};

/// `u[slave] = sign * u[master]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pair {
    pub master: usize,
    pub slave: usize,
    pub sign: i8,
}

/// Homogeneous Dirichlet nodes plus signed master/slave identifications
/// for one rotor position.
///
/// Chains are resolved when the map is built: every slave points directly
/// at the root of its group, so no slave is also a master.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMap {
    pub dirichlet: BTreeSet<usize>,
    pub pairs: Vec<Pair>,
    /// Interface offset `k` in `[0, V)`.
    pub locked_shift: usize,
    /// Odd number of full sector wraps; flips every interface sign in an
    /// antiperiodic model.
    pub flipped: bool,
}

/// Constraints for the rotor position reached after shifting the interface
/// identification by `shift` vertices.
///
/// Stator ring vertex `i` is tied to rotor ring vertex `(i + k) mod V`.
/// In an antiperiodic sector the sign flips once for every time the index
/// wraps past the sector, counting the wraps already contained in `shift`.
pub fn build_constraints(mesh: &Mesh, shift: usize) -> ConstraintMap {
    let n = mesh.node_count();
    let anti = mesh.symmetry().is_antiperiodic();

    // u[b] = sign * u[a]
    let mut relations: Vec<(usize, usize, i8)> = Vec::new();
    for &(a, b) in mesh.periodic_pairs() {
        relations.push((a, b, if anti { -1 } else { 1 }));
    }
    let (k, flipped) = match mesh.interface() {
        Some(rings) if !rings.is_empty() => {
            let v = rings.len();
            let k = shift % v;
            let flipped = (shift / v) % 2 == 1;
            for i in 0..v {
                let j = i + k;
                let wraps = shift / v + usize::from(j >= v);
                let sign = if anti && wraps % 2 == 1 { -1 } else { 1 };
                relations.push((rings.rotor[j % v], rings.stator[i], sign));
            }
            (k, flipped && anti)
        }
        _ => (0, false),
    };

    let mut dirichlet: BTreeSet<usize> = mesh.boundary_nodes(BoundaryRole::Outer);
    dirichlet.extend(mesh.boundary_nodes(BoundaryRole::Shaft));

    // Union-find with parity: value(x) = parity(x) * value(root(x)).
    let mut parent: Vec<usize> = (0..n).collect();
    let mut parity: Vec<i8> = vec![1; n];
    let mut contradictory = vec![false; n];
    fn find(parent: &mut [usize], parity: &mut [i8], x: usize) -> (usize, i8) {
        let mut path = vec![];
        let mut r = x;
        while parent[r] != r {
            path.push(r);
            r = parent[r];
        }
        // Compress from the top so each parity accumulates correctly.
        for &node in path.iter().rev() {
            let p = parent[node];
            if p != r {
                parity[node] *= parity[p];
            }
            parent[node] = r;
        }
        (r, parity[x])
    }
    for (a, b, s) in relations {
        let (ra, pa) = find(&mut parent, &mut parity, a);
        let (rb, pb) = find(&mut parent, &mut parity, b);
        if ra == rb {
            if pa * s != pb {
                contradictory[ra] = true;
            }
            continue;
        }
        // value(b) = s * value(a): pb*v(rb) = s*pa*v(ra)
        let (root, child, rel) = if ra < rb { (ra, rb, s * pa * pb) } else { (rb, ra, s * pa * pb) };
        parent[child] = root;
        parity[child] = rel;
        contradictory[root] |= contradictory[child];
    }

    let mut groups: BTreeMap<usize, Vec<(usize, i8)>> = BTreeMap::new();
    for x in 0..n {
        let (r, p) = find(&mut parent, &mut parity, x);
        groups.entry(r).or_default().push((x, p));
    }
    let mut pairs = Vec::new();
    for (root, members) in groups {
        if members.len() == 1 {
            continue;
        }
        let pinned = contradictory[root] || members.iter().any(|(x, _)| dirichlet.contains(x));
        if pinned {
            dirichlet.extend(members.iter().map(|&(x, _)| x));
            continue;
        }
        for (x, p) in members {
            if x != root {
                pairs.push(Pair { master: root, slave: x, sign: p });
            }
        }
    }
    pairs.sort_by_key(|p| p.slave);

    ConstraintMap { dirichlet, pairs, locked_shift: k, flipped }
}
