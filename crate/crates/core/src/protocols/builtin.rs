//! Concrete protocols for the Bell-state tasks.

use std::collections::BTreeMap;

use super::{
    run_exact, tally_classifier, Classifier, FactorRef, Measurement, Protocol, ProtocolError, Step,
    Transcript,
};
use crate::families::{bell, bell_basis, ghz3_basis, BellIndex};
use crate::subsets::{hypothesis_ensemble, StateSet, SubsetTask};

/// Names accepted by [`protocol_by_name`].
pub const BUILTIN_PROTOCOLS: [&str; 3] = ["bell32", "bell43", "copy1_computational"];

const BELL43_TABLE: &str = include_str!("../../data/bell43_classifier.txt");

fn joint_measurement(
    party: &str,
    copies: usize,
    basis: &[crate::statespace::StateVector],
) -> Measurement {
    let targets = (1..=copies).map(|c| FactorRef::new(party, c)).collect();
    Measurement::from_basis(party, targets, basis)
}

fn two_party(name: &str, copies: usize, basis: &[crate::statespace::StateVector]) -> Protocol {
    Protocol::new(
        name,
        vec![
            Step::new(joint_measurement("A", copies, basis)),
            Step::new(joint_measurement("B", copies, basis)),
        ],
    )
}

/// Task over the listed Bell states (1-based Bell indices, in the given order).
pub fn bell_task(indices: &[usize], k: usize) -> Result<SubsetTask, ProtocolError> {
    let states = indices
        .iter()
        .map(|&i| {
            BellIndex::new(i)
                .map(bell)
                .map_err(|e| ProtocolError::Builtin(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let name = format!(
        "bell[{}]",
        indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(SubsetTask::new(StateSet::new(name, states)?, k)?)
}

/// Decision table for the three-Bell-state, pair-subset task: subsets are
/// positions in `{B1, B2, B3}`; transcripts are (Alice, Bob) Bell outcomes.
pub fn bell32_classifier() -> Classifier {
    type Column = (&'static [usize], [(usize, usize); 4]);
    let columns: [Column; 3] = [
        (&[0, 1], [(1, 2), (2, 1), (3, 4), (4, 3)]),
        (&[1, 2], [(1, 4), (2, 3), (3, 2), (4, 1)]),
        (&[0, 2], [(1, 3), (2, 4), (3, 1), (4, 2)]),
    ];
    let mut table = BTreeMap::new();
    for (subset, pairs) in columns {
        for (a, b) in pairs {
            table.insert(
                Transcript::from_pairs(&[("A", a), ("B", b)]),
                subset.to_vec(),
            );
        }
    }
    Classifier::new(table)
}

/// Alice and Bob each measure their two qubits in the Bell basis.
pub fn builtin_bell32() -> (Protocol, Classifier) {
    (two_party("bell32", 2, &bell_basis()), bell32_classifier())
}

/// Frozen decision table for the four-Bell-state, triple-subset task.
///
/// Derived by [`first_match_classifier`]: the GHZ-basis transcripts of
/// `{B1,B2,B3}` overlap those of `{B1,B3,B4}` (and `{B1,B2,B4}` those of
/// `{B2,B3,B4}`), so the table is total on reachable transcripts but not
/// a perfect identifier.
pub fn bell43_classifier() -> Classifier {
    let mut table = BTreeMap::new();
    for line in BELL43_TABLE.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = line.split_once("->").expect("classifier line has '->'");
        let nums = |s: &str| -> Vec<usize> {
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .expect("classifier entry is an integer")
                })
                .collect()
        };
        let labels = nums(lhs);
        let subset: Vec<usize> = nums(rhs).into_iter().map(|i| i - 1).collect();
        table.insert(
            Transcript::from_pairs(&[("A", labels[0]), ("B", labels[1])]),
            subset,
        );
    }
    Classifier::new(table)
}

/// Alice and Bob each measure their three qubits in the three-qubit GHZ basis.
pub fn builtin_bell43() -> (Protocol, Classifier) {
    (two_party("bell43", 3, &ghz3_basis()), bell43_classifier())
}

/// The Bell-basis protocol applied to another triple of Bell states, with the
/// classifier derived by tallying. `triple` holds 1-based Bell indices.
pub fn builtin_bell32_variants(
    triple: [usize; 3],
) -> Result<(Protocol, Classifier), ProtocolError> {
    let mut sorted = triple;
    sorted.sort_unstable();
    if sorted[0] == sorted[1] || sorted[1] == sorted[2] || sorted[0] < 1 || sorted[2] > 4 {
        return Err(ProtocolError::Builtin(format!(
            "{triple:?} is not a three-element subset of the Bell indices 1..=4"
        )));
    }
    let task = bell_task(&sorted, 2)?;
    let (protocol, _) = builtin_bell32();
    let report = run_exact(&protocol, &hypothesis_ensemble(&task)?)?;
    let classifier = tally_classifier(&report)?;
    Ok((protocol, classifier))
}

/// Measures only `party`'s first-copy qudit in the computational basis.
pub fn copy1_computational(party: &str) -> Protocol {
    Protocol::new(
        "copy1_computational",
        vec![Step::new(Measurement::computational(
            party,
            FactorRef::new(party, 1),
            2,
        ))],
    )
}

pub fn protocol_by_name(name: &str) -> Option<Protocol> {
    match name {
        "bell32" => Some(builtin_bell32().0),
        "bell43" => Some(builtin_bell43().0),
        "copy1_computational" => Some(copy1_computational("A")),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{first_match_classifier, perfect_identification, validate};

    fn t(a: usize, b: usize) -> Transcript {
        Transcript::from_pairs(&[("A", a), ("B", b)])
    }

    #[test]
    fn table_entries() {
        let c = bell32_classifier();
        assert_eq!(c.classify(&t(1, 2)), Some(&[0, 1][..]));
        assert_eq!(c.classify(&t(2, 3)), Some(&[1, 2][..]));
        assert_eq!(c.classify(&t(4, 2)), Some(&[0, 2][..]));
        assert_eq!(c.table().len(), 12);
    }

    #[test]
    fn builtins_validate() {
        assert!(validate(&builtin_bell32().0).is_valid());
        assert!(validate(&builtin_bell43().0).is_valid());
    }

    #[test]
    fn first_variant_reproduces_table() {
        let (_, c) = builtin_bell32_variants([1, 2, 3]).unwrap();
        assert_eq!(c, bell32_classifier());
    }

    #[test]
    fn every_triple_identifies() {
        for triple in [[1, 2, 3], [1, 2, 4], [1, 3, 4], [2, 3, 4]] {
            let (p, c) = builtin_bell32_variants(triple).unwrap();
            let task = bell_task(&triple, 2).unwrap();
            let report = run_exact(&p, &hypothesis_ensemble(&task).unwrap()).unwrap();
            assert!(
                perfect_identification(&report, &c).unwrap().identified,
                "{triple:?}"
            );
        }
    }

    #[test]
    fn variants_reject_bad_triples() {
        assert!(builtin_bell32_variants([1, 1, 2]).is_err());
        assert!(builtin_bell32_variants([1, 2, 5]).is_err());
    }

    #[test]
    fn frozen_bell43_table_matches_first_match_tally() {
        let (p, frozen) = builtin_bell43();
        let task = bell_task(&[1, 2, 3, 4], 3).unwrap();
        let report = run_exact(&p, &hypothesis_ensemble(&task).unwrap()).unwrap();
        assert_eq!(first_match_classifier(&report), frozen);
        assert_eq!(frozen.table().len(), 48);
        let err = tally_classifier(&report).unwrap_err();
        assert!(matches!(err, ProtocolError::Ambiguous { .. }));
    }
}
