use aklt_core::mbqc::tables::{committed_json, verify_against, verify_committed, TableError};
use aklt_core::mbqc::{basis_catalog, CatalogEntry, Gate, OutcomeTables, Pauli};

#[test]
fn committed_tables_regenerate_byte_identical() {
    verify_committed().unwrap();
    assert_eq!(OutcomeTables::generate().unwrap().to_json(), committed_json());
}

#[test]
fn tampered_entry_is_named() {
    let tampered = committed_json().replacen("\"pauli\": \"Y\"", "\"pauli\": \"X\"", 1);
    assert_ne!(tampered, committed_json());
    match verify_against(&tampered) {
        Err(TableError::Mismatch { path, committed, regenerated }) => {
            assert!(path.starts_with("single_qubit[0].outcomes[2]"), "{path}");
            assert_eq!(committed, "\"X\"");
            assert_eq!(regenerated, "\"Y\"");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(verify_against("{ not json"), Err(TableError::Parse(_))));
}

fn symplectic(p: Pauli) -> (bool, bool) {
    p.bits()
}

fn anticommutes(a: (Pauli, Pauli), b: (Pauli, Pauli)) -> bool {
    let one = |p: Pauli, q: Pauli| {
        let (x1, z1) = symplectic(p);
        let (x2, z2) = symplectic(q);
        (x1 & z2) ^ (z1 & x2)
    };
    one(a.0, b.0) ^ one(a.1, b.1)
}

/// `exp(i pi/4 G)` maps `P` to `P` when `[P, G] = 0` and to `P G` (up to phase) otherwise.
#[test]
fn all_sixteen_propagations_per_gate() {
    for gate in Gate::ALL {
        let g = (gate.m.pauli(), gate.n.pauli());
        for p1 in Pauli::ALL {
            for p2 in Pauli::ALL {
                let expected = if anticommutes((p1, p2), g) { (p1.mul(g.0), p2.mul(g.1)) } else { (p1, p2) };
                assert_eq!(gate.propagate(p1, p2), expected, "{gate} on {p1:?}{p2:?}");
            }
        }
    }
}

#[test]
fn catalog_entries_are_complete() {
    for theta in [0.0, 0.3, 1.1, 2.7] {
        for (name, entry) in basis_catalog(theta) {
            let defect = match entry {
                CatalogEntry::Basis(b) => b.completeness_defect(),
                CatalogEntry::Povm(k) => k.completeness_defect(),
            };
            assert!(defect < 1e-12, "{name}: {defect}");
        }
    }
}

#[test]
fn every_entangle_pair_realises_some_gate_and_all_gates_appear() {
    let t = OutcomeTables::embedded();
    let mut seen = std::collections::BTreeSet::new();
    for a in 0..4 {
        for d in 0..4 {
            let e = t.entangle_entry(a, d);
            assert_eq!(e.success.len(), 4);
            assert_eq!(e.failure.len(), 4);
            seen.insert(e.gate);
        }
    }
    assert_eq!(seen.len(), 4);
}
