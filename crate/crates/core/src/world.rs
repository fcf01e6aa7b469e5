//! Population and link storage shared by every model layer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::space::{GroupId, GroupState, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}

impl Sex {
    pub fn index(self) -> usize {
        match self {
            Sex::F => 0,
            Sex::M => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub group: GroupId,
    pub sex: Sex,
    pub position: Point,
    pub born_at: u64,
    /// Sorted ascending.
    pub neighbors: Vec<NodeId>,
}

impl Node {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkKey(pub NodeId, pub NodeId);

impl LinkKey {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            LinkKey(a, b)
        } else {
            LinkKey(b, a)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub formed_at: u64,
    pub expires_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemovalCause {
    Death,
    Emigration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLifeRecord {
    pub id: NodeId,
    pub born_at: u64,
    pub removed_at: u64,
    pub cause: RemovalCause,
}

/// JSON maps need string keys, so links are stored as a sorted entry list.
mod link_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::{Link, LinkKey};

    pub fn serialize<S: Serializer>(map: &BTreeMap<LinkKey, Link>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<LinkKey, Link>, D::Error> {
        let entries: Vec<(LinkKey, Link)> = Vec::deserialize(d)?;
        Ok(entries.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub step: u64,
    pub region_side: f64,
    pub groups: Vec<GroupState>,
    pub nodes: BTreeMap<NodeId, Node>,
    #[serde(with = "link_entries")]
    pub links: BTreeMap<LinkKey, Link>,
    pub next_id: u64,
    /// Closed life records, in removal order.
    pub departed: Vec<NodeLifeRecord>,
}

impl World {
    pub fn new(region_side: f64, groups: Vec<GroupState>) -> Self {
        World {
            step: 0,
            region_side,
            groups,
            nodes: BTreeMap::new(),
            links: BTreeMap::new(),
            next_id: 0,
            departed: Vec::new(),
        }
    }

    pub fn population(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.nodes.get(&id).map_or(0, Node::degree)
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        self.nodes.get(&id).map_or(&[], |n| n.neighbors.as_slice())
    }

    pub fn is_linked(&self, a: NodeId, b: NodeId) -> bool {
        self.nodes
            .get(&a)
            .is_some_and(|n| n.neighbors.binary_search(&b).is_ok())
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            2.0 * self.links.len() as f64 / self.nodes.len() as f64
        }
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.groups.len()];
        for n in self.nodes.values() {
            sizes[n.group.index()] += 1;
        }
        sizes
    }

    pub fn add_node(&mut self, group: GroupId, sex: Sex, position: Point) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(
            id,
            Node {
                id,
                group,
                sex,
                position,
                born_at: self.step,
                neighbors: Vec::new(),
            },
        );
        id
    }

    /// Adds the link `a-b`. Returns false (and changes nothing) for self
    /// pairs, unknown nodes, or an already linked pair.
    pub fn add_link(&mut self, a: NodeId, b: NodeId, link: Link) -> bool {
        if a == b || !self.contains(a) || !self.contains(b) {
            return false;
        }
        let key = LinkKey::new(a, b);
        if self.links.contains_key(&key) {
            return false;
        }
        self.links.insert(key, link);
        for (x, y) in [(a, b), (b, a)] {
            let nbrs = &mut self.nodes.get_mut(&x).expect("checked").neighbors;
            let pos = nbrs.binary_search(&y).unwrap_err();
            nbrs.insert(pos, y);
        }
        true
    }

    pub fn remove_link(&mut self, a: NodeId, b: NodeId) -> Option<Link> {
        let link = self.links.remove(&LinkKey::new(a, b))?;
        for (x, y) in [(a, b), (b, a)] {
            if let Some(n) = self.nodes.get_mut(&x) {
                if let Ok(pos) = n.neighbors.binary_search(&y) {
                    n.neighbors.remove(pos);
                }
            }
        }
        Some(link)
    }

    /// Deletes a node with all its incident links and closes its life
    /// record. Sample bookkeeping is the caller's job.
    pub fn remove_node(&mut self, id: NodeId, cause: RemovalCause) -> Option<NodeLifeRecord> {
        let node = self.nodes.remove(&id)?;
        for nb in &node.neighbors {
            self.links.remove(&LinkKey::new(id, *nb));
            if let Some(n) = self.nodes.get_mut(nb) {
                if let Ok(pos) = n.neighbors.binary_search(&id) {
                    n.neighbors.remove(pos);
                }
            }
        }
        let record = NodeLifeRecord {
            id,
            born_at: node.born_at,
            removed_at: self.step,
            cause,
        };
        self.departed.push(record.clone());
        Some(record)
    }

    /// Checks the structural invariants: symmetric sorted adjacency matching
    /// the link table, no self links, every endpoint alive, every position
    /// and center in the region, every group id valid.
    pub fn check_invariants(&self) -> Result<(), String> {
        let side = self.region_side;
        for g in &self.groups {
            if !crate::space::in_region(g.center, side) {
                return Err(format!("group {:?} center outside region", g.id));
            }
        }
        let mut incident = 0usize;
        for n in self.nodes.values() {
            if n.group.index() >= self.groups.len() {
                return Err(format!("node {:?} has unknown group", n.id));
            }
            if !crate::space::in_region(n.position, side) {
                return Err(format!("node {:?} outside region", n.id));
            }
            if n.neighbors.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("node {:?} adjacency not strictly sorted", n.id));
            }
            for nb in &n.neighbors {
                if *nb == n.id {
                    return Err(format!("self link at {:?}", n.id));
                }
                if !self.links.contains_key(&LinkKey::new(n.id, *nb)) {
                    return Err(format!("adjacency {:?}-{:?} missing from link table", n.id, nb));
                }
            }
            incident += n.neighbors.len();
        }
        for (k, l) in &self.links {
            if k.0 == k.1 {
                return Err("self link in table".into());
            }
            if !self.contains(k.0) || !self.contains(k.1) {
                return Err(format!("link {k:?} references a removed node"));
            }
            if l.expires_at <= l.formed_at {
                return Err(format!("link {k:?} expires before it forms"));
            }
        }
        if incident != 2 * self.links.len() {
            return Err("degree sum does not match twice the link count".into());
        }
        Ok(())
    }
}
