//! Bundled configurations.

use crate::config::RunConfig;
use crate::error::CliError;

pub const PRESETS: &[(&str, &str)] = &[
    ("nc60_mi_minus1", include_str!("../presets/nc60_mi_minus1.cfg")),
    ("nc60_mi_0", include_str!("../presets/nc60_mi_0.cfg")),
    ("nc60_composite", include_str!("../presets/nc60_composite.cfg")),
    ("theta2_120", include_str!("../presets/theta2_120.cfg")),
];

/// Looks a preset up by name, with or without `.cfg`. `nc60` is the `M_I = -1` preset.
pub fn preset_text(name: &str) -> Result<&'static str, CliError> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    let name = if name == "nc60" { "nc60_mi_minus1" } else { name };
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!(
                "unknown preset `{name}` (available: nc60, {})",
                known.join(", ")
            ))
        })
}

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    RunConfig::parse(preset_text(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse() {
        for (name, _) in PRESETS {
            preset(name).unwrap();
        }
        assert_eq!(preset("nc60").unwrap(), preset("nc60_mi_minus1.cfg").unwrap());
        assert!(preset("missing").is_err());
    }

    #[test]
    fn nc60_values() {
        let c = preset("nc60").unwrap();
        let p = c.system_params().unwrap();
        assert!((p.delta_hz() - 25_815.93).abs() < 0.01);
        assert_eq!(c.t2_s, Some(210e-6));
        assert_eq!(c.sequence.pulse1_duration_s, Some(56e-9));
        assert_eq!(c.sequence.pulse2_duration_s, Some(112e-9));
        assert_eq!(c.ensemble.as_ref().unwrap().sigma_rad, 0.31);
    }
}
