//! Scenario configs shipped with the tool, addressable as `preset:<name>`.

pub const NAMES: [&str; 5] = [
    "logistic",
    "equilibrium",
    "disruptive",
    "ghost",
    "sweep-benchmark",
];

pub fn get(name: &str) -> Option<&'static str> {
    Some(match name {
        "logistic" => include_str!("../presets/logistic.toml"),
        "equilibrium" => include_str!("../presets/equilibrium.toml"),
        "disruptive" => include_str!("../presets/disruptive.toml"),
        "ghost" => include_str!("../presets/ghost.toml"),
        "sweep-benchmark" => include_str!("../presets/sweep-benchmark.toml"),
        _ => return None,
    })
}
