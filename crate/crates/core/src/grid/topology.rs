use std::collections::{HashMap, HashSet, VecDeque};

use super::{BranchSpec, BusId, BusKind, BusSpec, GridError};

/// Upstream/downstream structure of a radial feeder, in bus indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Topology {
    root: usize,
    /// Branch feeding each bus; `None` for the substation.
    parent_branch: Vec<Option<usize>>,
    parent_bus: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Branches leaving each bus, aligned with `children`.
    child_branches: Vec<Vec<usize>>,
    /// Breadth-first order from the substation.
    order: Vec<usize>,
    depth: Vec<usize>,
    /// (from, to) bus index of every branch after orientation.
    ends: Vec<(usize, usize)>,
}

impl Topology {
    /// Checks radiality and flips branches so that `from` is upstream.
    pub(super) fn build(buses: &[BusSpec], branches: &mut [BranchSpec]) -> Result<Self, GridError> {
        let n = buses.len();
        let mut index: HashMap<BusId, usize> = HashMap::with_capacity(n);
        for (i, b) in buses.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(GridError::Topology(format!("duplicate bus id {}", b.id)));
            }
        }
        let root = buses
            .iter()
            .position(|b| b.kind == BusKind::Substation)
            .ok_or_else(|| GridError::Topology("no substation bus".into()))?;

        let mut seen = HashSet::new();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, br) in branches.iter().enumerate() {
            if br.from == br.to {
                return Err(GridError::Topology(format!("self-loop at bus {}", br.from)));
            }
            let a = *index.get(&br.from).ok_or_else(|| {
                GridError::Topology(format!("branch references unknown bus {}", br.from))
            })?;
            let b = *index.get(&br.to).ok_or_else(|| {
                GridError::Topology(format!("branch references unknown bus {}", br.to))
            })?;
            let key = (br.from.min(br.to), br.from.max(br.to));
            if !seen.insert(key) {
                return Err(GridError::Topology(format!(
                    "duplicate branch ({}, {})",
                    br.from, br.to
                )));
            }
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        if branches.len() + 1 != n {
            return Err(GridError::Topology(format!(
                "radial network needs {} branches for {} buses, found {}",
                n - 1,
                n,
                branches.len()
            )));
        }

        let mut parent_branch = vec![None; n];
        let mut parent_bus = vec![None; n];
        let mut depth = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        depth[root] = 0;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next = adj[u].clone();
            next.sort_by_key(|&(_, k)| k);
            for (v, k) in next {
                if Some(k) == parent_branch[u] {
                    continue;
                }
                if depth[v] != usize::MAX {
                    return Err(GridError::Topology(format!(
                        "cycle through branch ({}, {})",
                        branches[k].from, branches[k].to
                    )));
                }
                depth[v] = depth[u] + 1;
                parent_branch[v] = Some(k);
                parent_bus[v] = Some(u);
                queue.push_back(v);
            }
        }
        if let Some(i) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(GridError::Topology(format!(
                "bus {} is not connected to the substation",
                buses[i].id
            )));
        }

        let mut ends = vec![(0, 0); branches.len()];
        let mut children = vec![Vec::new(); n];
        let mut child_branches = vec![Vec::new(); n];
        for &v in &order {
            if let (Some(k), Some(u)) = (parent_branch[v], parent_bus[v]) {
                let br = &mut branches[k];
                if br.from != buses[u].id {
                    std::mem::swap(&mut br.from, &mut br.to);
                }
                ends[k] = (u, v);
                children[u].push(v);
                child_branches[u].push(k);
            }
        }
        Ok(Self {
            root,
            parent_branch,
            parent_bus,
            children,
            child_branches,
            order,
            depth,
            ends,
        })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// U(i): the single upstream bus, or none for the substation.
    pub fn upstream(&self, bus: usize) -> Option<usize> {
        self.parent_bus[bus]
    }

    /// D(i): downstream neighbours.
    pub fn downstream(&self, bus: usize) -> &[usize] {
        &self.children[bus]
    }

    pub fn parent_branch(&self, bus: usize) -> Option<usize> {
        self.parent_branch[bus]
    }

    pub fn child_branches(&self, bus: usize) -> &[usize] {
        &self.child_branches[bus]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn depth(&self, bus: usize) -> usize {
        self.depth[bus]
    }

    /// Hop distance of a branch from the substation (0 when it leaves the substation).
    pub fn branch_depth(&self, branch: usize) -> usize {
        self.depth[self.ends[branch].0]
    }

    /// (upstream, downstream) bus indices of a branch.
    pub fn ends(&self, branch: usize) -> (usize, usize) {
        self.ends[branch]
    }

    /// Buses in the subtree rooted at `bus`, including it.
    pub fn subtree(&self, bus: usize) -> Vec<usize> {
        let mut out = vec![bus];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{bus, line};
    use super::super::{BusKind, CaseParams, NetworkCase};

    #[test]
    fn path_feeder() {
        let net = super::super::tests::path3();
        let t = net.topology();
        assert_eq!(t.upstream(2), Some(1));
        assert_eq!(t.downstream(0), &[1]);
        assert_eq!(t.upstream(0), None);
    }

    #[test]
    fn star_feeder_and_orientation() {
        let net = NetworkCase::new(
            vec![
                bus(1, BusKind::Substation, 0, 0.0, 0.0),
                bus(2, BusKind::Load, 1, 1.0, 0.0),
                bus(3, BusKind::Load, 1, 1.0, 0.0),
                bus(4, BusKind::Load, 1, 1.0, 0.0),
            ],
            // (3, 1) is given leaf-first and must be flipped.
            vec![
                line(1, 2, 0.1, 0.1, 1.0),
                line(3, 1, 0.1, 0.1, 1.0),
                line(1, 4, 0.1, 0.1, 1.0),
            ],
            CaseParams::new(6.9),
        )
        .unwrap();
        let t = net.topology();
        assert_eq!(t.downstream(0), &[1, 2, 3]);
        for i in 1..4 {
            assert_eq!(t.upstream(i), Some(0));
        }
        assert_eq!((net.branches()[1].from, net.branches()[1].to), (1, 3));
    }

    #[test]
    fn cycle_is_rejected() {
        let err = NetworkCase::new(
            vec![
                bus(1, BusKind::Substation, 0, 0.0, 0.0),
                bus(2, BusKind::Load, 1, 1.0, 0.0),
                bus(3, BusKind::Load, 1, 1.0, 0.0),
                bus(4, BusKind::Load, 1, 1.0, 0.0),
            ],
            vec![
                line(1, 2, 0.1, 0.1, 1.0),
                line(2, 3, 0.1, 0.1, 1.0),
                line(3, 1, 0.1, 0.1, 1.0),
            ],
            CaseParams::new(6.9),
        )
        .unwrap_err();
        assert!(matches!(err, super::GridError::Topology(_)), "{err}");
    }

    #[test]
    fn duplicate_branch_is_rejected() {
        let err = NetworkCase::new(
            vec![
                bus(1, BusKind::Substation, 0, 0.0, 0.0),
                bus(2, BusKind::Load, 1, 1.0, 0.0),
                bus(3, BusKind::Load, 1, 1.0, 0.0),
            ],
            vec![line(2, 3, 0.1, 0.1, 1.0), line(3, 2, 0.1, 0.1, 1.0)],
            CaseParams::new(6.9),
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate branch"), "{err}");
    }
}
