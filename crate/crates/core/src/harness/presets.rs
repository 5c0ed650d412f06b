use super::scenario::*;
use crate::diagnostics::SupportRule;
use crate::error::{Error, Result};
use crate::model::{Domain, Drift, InitialData, Source};

pub const PRESETS: &[(&str, &str)] = &[
    ("barenblatt", "1D source-type solution, no drift or source"),
    ("annulus_core", "unsaturated core inside a saturated annulus, logistic source"),
    ("subquadratic_bump", "pressure bump growing like distance^1.5 at its edge"),
    ("r11_compatible", "paraboloid pressure with a constant source; the initial AB quantity is non-negative"),
    ("interior_ball_patch", "density patch under a slow rotation with a constant source"),
    ("rotation_drift", "off-centre bump carried by a rotation, logistic source"),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

fn square(h: f64) -> Domain {
    Domain { lo: vec![-h, -h], hi: vec![h, h] }
}

fn base(name: &str, model: ModelTemplate, m_values: Vec<f64>, include_limit: bool) -> Scenario {
    Scenario {
        name: name.into(),
        model,
        m_values,
        include_limit,
        cells: None,
        frames: 10,
        save_times: Vec::new(),
        solver: SolverSettings::default(),
        limit: LimitSettings::default(),
        support: SupportRule::Pressure,
        diagnostics: DiagnosticsSelection::default(),
        output: "runs".into(),
        seed: 0,
        write_snapshots: true,
    }
}

fn standard_diagnostics() -> DiagnosticsSelection {
    DiagnosticsSelection {
        ab: Some(AbSelection::default()),
        streamline: Some(StreamlineSelection::default()),
        nondegeneracy: Some(ProbeSelection::default()),
        expansion: None,
        convergence: None,
        dimension: None,
        oscillation: Some(OscillationSelection::default()),
    }
}

pub fn preset(name: &str) -> Result<Scenario> {
    let s = match name {
        "barenblatt" => {
            let model = ModelTemplate {
                drift: Drift::None,
                source: Source::None,
                horizon: 0.5,
                domain: Domain { lo: vec![-2.0], hi: vec![2.0] },
                init: InitialData::Barenblatt { t0: 0.5, radius: 1.0, center: vec![] },
            };
            let mut s = base(name, model, vec![2.0, 10.0, 40.0, 80.0], false);
            s.diagnostics = standard_diagnostics();
            s.diagnostics.expansion = Some(ExpansionSelection::default());
            s.diagnostics.convergence = Some(ConvergenceSelection::default());
            s
        }
        "annulus_core" => {
            let model = ModelTemplate {
                drift: Drift::None,
                source: Source::Logistic { a: 2.0 },
                horizon: 0.1,
                domain: square(2.5),
                init: InitialData::AnnulusPlusCore,
            };
            let mut s = base(name, model, vec![10.0, 20.0, 40.0, 80.0], true);
            // The core density is below one, so p_m ~ rho^(m-1) underflows any pressure threshold.
            s.support = SupportRule::Density;
            // The inner limit front moves fast while the core next to the shell is nearly saturated.
            s.limit.max_dt = 1e-3;
            s.diagnostics.convergence = Some(ConvergenceSelection { eta0: Some(0.0), ..Default::default() });
            s
        }
        "subquadratic_bump" => {
            let model = ModelTemplate {
                drift: Drift::None,
                source: Source::None,
                horizon: 0.5,
                domain: square(1.5),
                init: InitialData::SmoothBump {
                    center: vec![],
                    radius: 0.5,
                    amplitude: 0.5f64.powf(-1.5),
                    exponent: 1.5,
                },
            };
            let mut s = base(name, model, vec![2.0, 10.0, 40.0], false);
            s.diagnostics = standard_diagnostics();
            s
        }
        "r11_compatible" => {
            let model = ModelTemplate {
                drift: Drift::None,
                source: Source::Constant { value: 1.0 },
                horizon: 0.5,
                domain: square(1.5),
                init: InitialData::SmoothBump { center: vec![], radius: 0.5, amplitude: 0.2, exponent: 1.0 },
            };
            let mut s = base(name, model, vec![2.0, 10.0, 40.0], true);
            s.frames = 20;
            s.diagnostics = standard_diagnostics();
            s.diagnostics.ab = Some(AbSelection { eta0: Some(0.0), improved: true });
            s.diagnostics.expansion =
                Some(ExpansionSelection { start_taus: vec![0.1, 0.2, 0.3], ..Default::default() });
            s
        }
        "interior_ball_patch" => {
            let model = ModelTemplate {
                drift: Drift::Rotation { omega: 0.2, center: vec![] },
                source: Source::Constant { value: 1.0 },
                horizon: 0.5,
                domain: square(1.5),
                init: InitialData::Patch { center: vec![0.3, 0.0], radius: 0.4, level: 1.0, mollify_cells: 2 },
            };
            let mut s = base(name, model, vec![10.0, 20.0, 40.0], true);
            s.solver.cfl = 0.25;
            s.solver.positivity_floor = 1e-20;
            s.diagnostics = standard_diagnostics();
            s.diagnostics.expansion = Some(ExpansionSelection::default());
            s
        }
        "rotation_drift" => {
            let model = ModelTemplate {
                drift: Drift::Rotation { omega: 1.0, center: vec![] },
                source: Source::Logistic { a: 1.0 },
                horizon: 0.5,
                domain: square(1.5),
                init: InitialData::SmoothBump { center: vec![0.5, 0.0], radius: 0.35, amplitude: 0.25, exponent: 1.0 },
            };
            let mut s = base(name, model, vec![10.0, 20.0, 40.0, 80.0], true);
            s.solver.cfl = 0.25;
            s.solver.positivity_floor = 1e-20;
            s.diagnostics = standard_diagnostics();
            s.diagnostics.convergence =
                Some(ConvergenceSelection { check_times: vec![0.25, 0.5], ..Default::default() });
            s.diagnostics.dimension = Some(DimensionSelection::default());
            s
        }
        other => {
            return Err(Error::UnknownPreset(format!("{other} (known: {})", preset_names().join(", "))));
        }
    };
    s.normalize()
}
