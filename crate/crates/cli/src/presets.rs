//! Training and clustering defaults bundled with each architecture preset,
//! so benchmark-scale runs need no manual configuration.

#[derive(Debug, Clone, Copy)]
pub struct PresetDefaults {
    pub k: usize,
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

pub fn defaults(name: &str) -> Option<PresetDefaults> {
    let d = match name {
        // 38 subjects; 50 + 25K epoch schedule
        "eyaleb-dcfsc" | "eyaleb-dsc" => PresetDefaults {
            k: 38,
            lambda: 5e5,
            lambda1: 1.0,
            lambda2: 1.0,
            learning_rate: 1e-3,
            epochs: 50 + 25 * 38,
        },
        "orl-dcfsc" | "orl-dsc" => PresetDefaults {
            k: 40,
            lambda: 5e5,
            lambda1: 1.0,
            lambda2: 1.0,
            learning_rate: 1e-3,
            epochs: 700,
        },
        "coil100-dcfsc" | "coil100-dsc" => PresetDefaults {
            k: 100,
            lambda: 10.0,
            lambda1: 1.0,
            lambda2: 1.0,
            learning_rate: 1e-3,
            epochs: 175,
        },
        "mlp-small" => PresetDefaults {
            k: 4,
            lambda: 1e-3,
            lambda1: 1.0,
            lambda2: 1.0,
            learning_rate: 1e-3,
            epochs: 200,
        },
        _ => return None,
    };
    Some(d)
}
