//! Built-in scenarios covering the dynamical regimes of the model.

use crate::scenario::{ParamOverrides, Scenario};

fn scenario(name: &str, description: &str, params: ParamOverrides) -> Scenario {
    Scenario {
        description: Some(description.to_string()),
        params,
        ..Scenario::new(name)
    }
}

/// Every built-in scenario. Horizons and step sizes are this tool's own
/// defaults (`dt = 0.01`, samples every `0.1`, `t_end = 200` unless noted).
pub fn catalog() -> Vec<Scenario> {
    let o = ParamOverrides::default;
    let mut out = vec![
        scenario(
            "base",
            "Reference parameters: sustained oscillations of the metastatic burden",
            o(),
        ),
        scenario(
            "linear",
            "No systemic inhibition (e = 0): exponential growth at the Malthus rate",
            ParamOverrides {
                e: Some(0.0),
                ..o()
            },
        ),
        scenario(
            "large-b",
            "Tenfold stimulation b = 10",
            ParamOverrides {
                b: Some(10.0),
                ..o()
            },
        ),
        scenario(
            "large-m",
            "Tenfold dissemination m = 10",
            ParamOverrides {
                m: Some(10.0),
                ..o()
            },
        ),
        scenario(
            "large-e",
            "Tenfold inhibitor efficacy e = 10",
            ParamOverrides {
                e: Some(10.0),
                ..o()
            },
        ),
        scenario(
            "small-b",
            "Stimulation b = 0.1: low-amplitude homeostatic burden",
            ParamOverrides {
                b: Some(0.1),
                ..o()
            },
        ),
        scenario(
            "small-m",
            "Dissemination m = 0.1: delayed oscillations",
            ParamOverrides {
                m: Some(0.1),
                ..o()
            },
        ),
        scenario(
            "small-e",
            "Inhibitor efficacy e = 0.1: larger oscillations",
            ParamOverrides {
                e: Some(0.1),
                ..o()
            },
        ),
        scenario(
            "bursts",
            "m = 10, k = 0.1: sharp relapses separated by near-zero burden",
            ParamOverrides {
                m: Some(10.0),
                k: Some(0.1),
                ..o()
            },
        ),
        scenario(
            "bursts-long",
            "m = 10, k = 0.1 over a long horizon, log scale: bounded, non-periodic",
            ParamOverrides {
                m: Some(10.0),
                k: Some(0.1),
                ..o()
            },
        ),
        scenario(
            "complex-periodic",
            "m = 0.1, k = 0.1, e = 0.02: periodic with a complex repeated pattern",
            ParamOverrides {
                m: Some(0.1),
                k: Some(0.1),
                e: Some(0.02),
                ..o()
            },
        ),
        scenario(
            "deep-seed",
            "Newborn tumors at (1e-4, 1e-3): burden settles toward a plateau",
            ParamOverrides {
                v0: Some(1e-4),
                k0: Some(1e-3),
                ..o()
            },
        ),
    ];
    for sc in &mut out {
        match sc.name.as_str() {
            "linear" => sc.settings.t_end = Some(60.0),
            "bursts-long" => {
                sc.settings.t_end = Some(1000.0);
                sc.outputs.log_scale = true;
            }
            "bursts" => sc.outputs.log_scale = false,
            _ => {}
        }
    }
    out
}

pub fn find(name: &str) -> Option<Scenario> {
    catalog().into_iter().find(|s| s.name == name)
}
