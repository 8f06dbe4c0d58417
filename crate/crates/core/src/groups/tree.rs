use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{structural_relation, CompiledGroup, Group, Literal, Relation, ROOT_ID};
use crate::data::{AttributeSet, Dataset, Row};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub group: Group,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
}

/// Rooted tree of nested groups. Nodes are stored in breadth-first order
/// (index 0 is the root, siblings sorted by id), so iterating `nodes()`
/// visits every parent before its children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Group>", into = "Vec<Group>")]
pub struct GroupTree {
    nodes: Vec<TreeNode>,
}

impl TryFrom<Vec<Group>> for GroupTree {
    type Error = Error;

    fn try_from(groups: Vec<Group>) -> Result<Self> {
        GroupTree::from_groups(groups)
    }
}

impl From<GroupTree> for Vec<Group> {
    fn from(tree: GroupTree) -> Self {
        tree.nodes.into_iter().map(|n| n.group).collect()
    }
}

impl GroupTree {
    /// Arranges a hierarchically structured collection into its tree. The
    /// whole-space root is added when absent. Fails on any pair that is not
    /// disjoint or strictly nested.
    pub fn from_groups(mut groups: Vec<Group>) -> Result<GroupTree> {
        let root_pos = groups.iter().position(Group::is_whole_space);
        match root_pos {
            Some(p) => {
                let root = groups.remove(p);
                groups.insert(0, root);
            }
            None => {
                if groups.iter().any(|g| g.id == ROOT_ID) {
                    return Err(Error::Hierarchy(format!(
                        "id `{ROOT_ID}` is reserved for the whole space"
                    )));
                }
                groups.insert(0, Group::whole_space());
            }
        }

        let n = groups.len();
        let mut ids = std::collections::HashSet::new();
        for g in &groups {
            if !ids.insert(g.id.as_str()) {
                return Err(Error::Hierarchy(format!("duplicate group id `{}`", g.id)));
            }
        }

        // supersets[i] = indices of strict supersets of group i.
        let mut supersets: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                match structural_relation(&groups[i], &groups[j]) {
                    Some(Relation::Disjoint) => {}
                    Some(Relation::Subset) => supersets[i].push(j),
                    Some(Relation::Superset) => supersets[j].push(i),
                    Some(Relation::Equal) => {
                        return Err(Error::Hierarchy(format!(
                            "groups `{}` and `{}` have the same predicate",
                            groups[i].id, groups[j].id
                        )))
                    }
                    Some(Relation::Crossing) => {
                        return Err(Error::Hierarchy(format!(
                            "groups `{}` and `{}` overlap without nesting",
                            groups[i].id, groups[j].id
                        )))
                    }
                    None => {
                        return Err(Error::Hierarchy(format!(
                            "cannot relate `{}` and `{}` without data",
                            groups[i].id, groups[j].id
                        )))
                    }
                }
            }
        }

        // In a nested family the supersets of a group form a chain; the
        // parent is the smallest one, i.e. the one with the most supersets.
        let parent: Vec<Option<usize>> = (0..n)
            .map(|i| {
                supersets[i]
                    .iter()
                    .copied()
                    .max_by_key(|&s| supersets[s].len())
            })
            .collect();

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(i);
            }
        }
        for c in &mut children {
            c.sort_by(|&a, &b| groups[a].id.cmp(&groups[b].id));
        }

        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            queue.extend(children[i].iter().copied());
        }
        debug_assert_eq!(order.len(), n);
        let mut new_index = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }

        let mut nodes: Vec<TreeNode> = Vec::with_capacity(n);
        let mut slots: Vec<Option<Group>> = groups.into_iter().map(Some).collect();
        for &old in &order {
            let parent_new = parent[old].map(|p| new_index[p]);
            let depth = parent_new.map_or(0, |p| nodes[p].depth + 1);
            nodes.push(TreeNode {
                group: slots[old].take().expect("each group placed once"),
                parent: parent_new,
                children: children[old].iter().map(|&c| new_index[c]).collect(),
                depth,
            });
        }
        Ok(GroupTree { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &TreeNode {
        &self.nodes[index]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.group.id == id)
    }

    pub fn parent(&self, index: usize) -> Option<usize> {
        self.nodes[index].parent
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].children.is_empty())
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Strict ancestors of `index`, nearest first.
    pub fn ancestors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.nodes[index].parent, move |&p| self.nodes[p].parent)
    }

    pub fn groups(&self) -> Vec<Group> {
        self.nodes.iter().map(|n| n.group.clone()).collect()
    }

    pub fn compile(&self, attrs: &AttributeSet) -> Result<CompiledTree> {
        Ok(CompiledTree {
            groups: self
                .nodes
                .iter()
                .map(|n| n.group.compile(attrs))
                .collect::<Result<_>>()?,
            children: self.nodes.iter().map(|n| n.children.clone()).collect(),
        })
    }

    /// Row indices of `ds` contained in each node (ascending).
    pub fn memberships(&self, ds: &Dataset) -> Result<Vec<Vec<usize>>> {
        let compiled = self.compile(ds.attributes())?;
        let mut out = vec![Vec::new(); self.nodes.len()];
        let mut path = Vec::with_capacity(self.max_depth() + 1);
        for row in ds.rows() {
            compiled.path(&row, &mut path);
            for &node in &path {
                out[node].push(row.index());
            }
        }
        Ok(out)
    }

    /// `n_g` for every node on `ds`.
    pub fn counts(&self, ds: &Dataset) -> Result<Vec<usize>> {
        Ok(self.memberships(ds)?.iter().map(Vec::len).collect())
    }
}

/// A tree with predicates resolved against one attribute catalog.
#[derive(Debug, Clone)]
pub struct CompiledTree {
    groups: Vec<CompiledGroup>,
    children: Vec<Vec<usize>>,
}

impl CompiledTree {
    pub fn contains(&self, node: usize, row: &Row<'_>) -> bool {
        self.groups[node].contains(row)
    }

    /// Root-to-leaf descent, moving to the first child that contains the row.
    pub fn deepest(&self, row: &Row<'_>) -> usize {
        let mut node = 0;
        while let Some(&next) = self.children[node]
            .iter()
            .find(|&&c| self.groups[c].contains(row))
        {
            node = next;
        }
        node
    }

    /// Fills `path` with the descent from the root to [`Self::deepest`].
    pub fn path(&self, row: &Row<'_>, path: &mut Vec<usize>) {
        path.clear();
        let mut node = 0;
        path.push(node);
        while let Some(&next) = self.children[node]
            .iter()
            .find(|&&c| self.groups[c].contains(row))
        {
            node = next;
            path.push(node);
        }
    }
}

/// Index of the deepest node containing `row`.
pub fn deepest_containing(tree: &GroupTree, row: &Row<'_>) -> Result<usize> {
    Ok(tree.compile(row.dataset().attributes())?.deepest(row))
}

/// The attribute-product hierarchy: depth `k` holds every conjunction of the
/// first `k` attributes in `order`. Ids join category names with `∧`.
pub fn build_hierarchy(attrs: &AttributeSet, order: &[String]) -> Result<GroupTree> {
    let mut groups = vec![Group::whole_space()];
    let mut frontier: Vec<(String, Vec<Literal>)> = vec![(String::new(), Vec::new())];
    for name in order {
        let attr = attrs
            .by_name(name)
            .ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
        if attr.categories.is_empty() {
            return Err(Error::Hierarchy(format!("attribute `{name}` has no categories")));
        }
        let mut next = Vec::with_capacity(frontier.len() * attr.categories.len());
        for (id, lits) in &frontier {
            for cat in &attr.categories {
                let child_id = if id.is_empty() {
                    cat.clone()
                } else {
                    format!("{id}∧{cat}")
                };
                let mut child_lits = lits.clone();
                child_lits.push(Literal::new(name.clone(), cat.clone()));
                groups.push(Group::conjunction(child_id.clone(), child_lits.clone()));
                next.push((child_id, child_lits));
            }
        }
        frontier = next;
    }
    GroupTree::from_groups(groups)
}

/// How a run describes its hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HierarchySpec {
    Attributes(AttributeOrder),
    Nodes(NodeList),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeOrder {
    pub attribute_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeList {
    pub nodes: Vec<Group>,
}

impl HierarchySpec {
    pub fn attribute_order(order: Vec<String>) -> Self {
        HierarchySpec::Attributes(AttributeOrder {
            attribute_order: order,
        })
    }

    pub fn build(&self, attrs: &AttributeSet) -> Result<GroupTree> {
        match self {
            HierarchySpec::Attributes(a) => build_hierarchy(attrs, &a.attribute_order),
            HierarchySpec::Nodes(list) => {
                let tree = GroupTree::from_groups(list.nodes.clone())?;
                tree.compile(attrs)?;
                Ok(tree)
            }
        }
    }

    /// The raw group list (for validation without building a tree).
    pub fn groups(&self, attrs: &AttributeSet) -> Result<Vec<Group>> {
        match self {
            HierarchySpec::Attributes(_) => Ok(self.build(attrs)?.groups()),
            HierarchySpec::Nodes(list) => Ok(list.nodes.clone()),
        }
    }
}
