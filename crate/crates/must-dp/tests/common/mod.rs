#![allow(dead_code)]

pub mod bootstrap_scales;
pub mod distinct_counts;
pub mod amplification_examples;

/// Half a unit in the last printed place of `printed` (`"0.044"`, `"9.18e-5"`).
pub fn print_tolerance(printed: &str) -> f64 {
    match printed.split_once('e') {
        Some((mantissa, exp)) => {
            let decimals = mantissa.split_once('.').map_or(0, |(_, d)| d.len()) as i32;
            0.5 * 10f64.powi(exp.parse::<i32>().unwrap() - decimals)
        }
        None => {
            let decimals = printed.split_once('.').map_or(0, |(_, d)| d.len()) as i32;
            0.5 * 10f64.powi(-decimals)
        }
    }
}

/// Whether `value` prints as `printed`. A bare `0` demands exactly zero.
pub fn matches_print(value: f64, printed: &str) -> bool {
    let target: f64 = printed.parse().unwrap();
    if printed == "0" {
        return value == 0.0;
    }
    // A hair of slack for values sitting exactly on a rounding edge.
    (value - target).abs() <= print_tolerance(printed) * (1.0 + 1e-9)
}
