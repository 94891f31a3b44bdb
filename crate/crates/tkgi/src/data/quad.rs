//! Quadruples and label↔id vocabularies.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense entity id, `< |E|`.
pub type EntityId = usize;
/// Dense relation id, `< |R|` in raw data. Models and queries additionally
/// use `r + |R|` for the inverse direction of relation `r`.
pub type RelationId = usize;
/// Discrete timestamp. Ingestion maps calendar dates to day indexes starting
/// at 0, so within one corpus these are day offsets from the earliest event.
pub type Time = i64;

/// One timestamped fact: relation `relation` held from `subject` to `object`
/// at time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quadruple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub time: Time,
}

impl Quadruple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId, time: Time) -> Self {
        Self {
            subject,
            relation,
            object,
            time,
        }
    }

    /// The same fact read in the opposite direction, using the inverse
    /// relation id `relation + num_relations`. Subject prediction for the
    /// original fact becomes object prediction for the inverse.
    pub fn inverse(&self, num_relations: usize) -> Quadruple {
        Quadruple {
            subject: self.object,
            relation: self.relation + num_relations,
            object: self.subject,
            time: self.time,
        }
    }
}

/// Expand each quadruple into its forward and inverse directed forms, in
/// input order (forward then inverse per quad).
pub fn with_inverses(quads: &[Quadruple], num_relations: usize) -> Vec<Quadruple> {
    let mut out = Vec::with_capacity(quads.len() * 2);
    for q in quads {
        out.push(*q);
        out.push(q.inverse(num_relations));
    }
    out
}

/// A bijective label ↔ dense-id map. Ids are assigned in first-seen order
/// and are dense in `[0, len)`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    forward: HashMap<String, usize>,
    labels: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id for `label`, assigning the next dense id on first sight.
    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.forward.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.forward.insert(label.to_string(), id);
        self.labels.push(label.to_string());
        id
    }

    /// Id for `label` if already known.
    pub fn get(&self, label: &str) -> Option<usize> {
        self.forward.get(label).copied()
    }

    /// Label for `id`.
    pub fn label(&self, id: usize) -> Result<&str> {
        self.labels
            .get(id)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::IdOutOfRange(format!("vocabulary id {id} >= {}", self.len())))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in id order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intern_is_first_seen_order_and_bijective() {
        let mut v = Vocabulary::new();
        assert_eq!(v.intern("b"), 0);
        assert_eq!(v.intern("a"), 1);
        assert_eq!(v.intern("b"), 0);
        assert_eq!(v.len(), 2);
        assert_eq!(v.label(0).unwrap(), "b");
        assert_eq!(v.label(1).unwrap(), "a");
        assert_eq!(v.get("a"), Some(1));
        assert_eq!(v.get("z"), None);
        assert!(v.label(2).is_err());
    }

    #[test]
    fn inverse_swaps_roles_and_offsets_relation() {
        let q = Quadruple::new(3, 1, 5, 9);
        let inv = q.inverse(10);
        assert_eq!(inv, Quadruple::new(5, 11, 3, 9));
        // Double inverse under the expanded relation space returns the
        // original ids modulo the offset.
        assert_eq!(inv.inverse(0).subject, q.subject);
    }

    #[test]
    fn with_inverses_preserves_order() {
        let quads = vec![Quadruple::new(0, 0, 1, 0), Quadruple::new(1, 1, 2, 3)];
        let expanded = with_inverses(&quads, 2);
        assert_eq!(expanded.len(), 4);
        assert_eq!(expanded[0], quads[0]);
        assert_eq!(expanded[1], Quadruple::new(1, 2, 0, 0));
        assert_eq!(expanded[3], Quadruple::new(2, 3, 1, 3));
    }
}
