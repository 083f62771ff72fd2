//! Named problems that configs can reference with
//! `{"kind": "preset", "name": ...}`.

use emt_core::benchmark::{BaseFunction, BenchmarkSpec};
use emt_core::multix::{BilevelPreset, ScenarioSpec, SphereFidelitySpec};
use emt_core::EvolverConfig;

use crate::config::ProblemSpec;

/// Optimum of the 10-d multi-fidelity sphere stack.
pub const FIDELITY_SHIFT: [f64; 10] = [1.2, -0.8, 2.0, -1.5, 0.5, 0.9, -2.2, 1.7, -0.3, 0.4];

/// Short-pole lengths of the three pole-balancing tasks, in metres.
pub const POLE_LENGTHS: [f64; 3] = [0.60, 0.65, 0.70];

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "polecart-t1", description: "double-pole balancing, short pole 0.60 m" },
    Preset { name: "polecart-t2", description: "double-pole balancing, short pole 0.65 m" },
    Preset { name: "polecart-t3", description: "double-pole balancing, short pole 0.70 m" },
    Preset { name: "polecart-t123", description: "the three pole-balancing tasks together" },
    Preset { name: "sphere-related-10d", description: "two 10-d shifted spheres sharing one optimum" },
    Preset { name: "sphere-unrelated-10d", description: "two 10-d shifted spheres at opposite corners" },
    Preset { name: "fidelity-sphere-10d", description: "perturbed sphere (cost 0.1) helping a 10-d sphere" },
    Preset { name: "bilevel-quadratic", description: "coupled quadratic bilevel program, optimum (0.25, 0.25)" },
    Preset { name: "scenarios-sphere3", description: "three 5-d shifted-sphere scenarios" },
];

fn polecart(lengths: &[f64]) -> ProblemSpec {
    ProblemSpec::Polecart { short_pole_lengths: lengths.to_vec(), params: None }
}

pub fn lookup(name: &str) -> Option<ProblemSpec> {
    Some(match name {
        "polecart-t1" => polecart(&POLE_LENGTHS[..1]),
        "polecart-t2" => polecart(&POLE_LENGTHS[1..2]),
        "polecart-t3" => polecart(&POLE_LENGTHS[2..]),
        "polecart-t123" => polecart(&POLE_LENGTHS),
        "sphere-related-10d" => ProblemSpec::Benchmark(BenchmarkSpec::new(BaseFunction::Sphere, vec![10, 10], 1.0, 0)),
        "sphere-unrelated-10d" => ProblemSpec::Benchmark(BenchmarkSpec::new(BaseFunction::Sphere, vec![10, 10], 0.0, 0)),
        "fidelity-sphere-10d" => ProblemSpec::Multifidelity(SphereFidelitySpec::new(FIDELITY_SHIFT.to_vec(), 0.1)),
        "bilevel-quadratic" => {
            ProblemSpec::Bilevel { preset: BilevelPreset::CoupledQuadratic, lower: EvolverConfig::new(10, 20) }
        }
        "scenarios-sphere3" => ProblemSpec::Multiscenario(ScenarioSpec {
            function: BaseFunction::Sphere,
            shifts: vec![vec![1.0; 5], vec![-2.0, 0.5, 1.5, -1.0, 0.0], vec![3.0, -3.0, 2.0, -2.0, 1.0]],
        }),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_builds() {
        for p in PRESETS {
            let spec = lookup(p.name).unwrap_or_else(|| panic!("{} missing", p.name));
            assert!(spec.build().is_ok(), "{}", p.name);
        }
        assert!(lookup("nope").is_none());
    }
}
