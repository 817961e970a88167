//! A small synthetic protein shared by the backend and trajectory tests.

use rsgym::action::{extract_first_action, validate_action};
use rsgym::backend::{DesignRecord, MockBackend, MockConfig, MockFold};
use rsgym::residue::{code, Sequence};
use rsgym::script::{instantiate_script, EnvConfig, ScriptDocument};

pub fn fold() -> MockFold {
    MockFold {
        layers: "SSBCCCBSSBCCBSSSBCCCBSSBCCBSSS".into(),
        secondary_structure: "LHHHHHHHLLEEEEELLHHHHHHHLLEEEL".into(),
    }
}

pub fn mock(failure_rate: f64) -> MockBackend {
    MockBackend::new(MockConfig { fold: fold(), failure_rate, sweeps: 10 }).unwrap()
}

pub fn start(b: &MockBackend) -> DesignRecord {
    b.initial_record("init", Sequence::uniform(code("ALA"), fold().len())).unwrap()
}

pub fn doc(call: &str, cfg: &EnvConfig, step: usize) -> ScriptDocument {
    let env = extract_first_action(call).unwrap();
    let args = validate_action(&env, step, &cfg.palette()).unwrap();
    instantiate_script(&args, cfg, step).unwrap()
}

pub const PLAIN_ROTAMER: &str = "<action tag=\"run\"><name>rotamer_change</name></action>";

/// A record with the given sequence and per-residue terms; other fields zero.
pub fn bare(id: &str, seq: &str, repulsion: Vec<f64>, rama: Vec<f64>) -> DesignRecord {
    use rsgym::backend::{StructureMetrics, RAMA, REPULSION, TOTAL};
    let sequence: Sequence = seq.parse().unwrap();
    assert_eq!(sequence.len(), repulsion.len());
    assert_eq!(sequence.len(), rama.len());
    DesignRecord {
        id: id.into(),
        parent_id: None,
        structure_ref: format!("{id}.pdb"),
        sequence,
        scores: [(TOTAL.to_string(), 0.0)].into_iter().collect(),
        per_residue: [(REPULSION.to_string(), repulsion), (RAMA.to_string(), rama)].into_iter().collect(),
        structure_metrics: StructureMetrics::default(),
        progress_metrics: None,
        core_positions: Vec::new(),
    }
}
