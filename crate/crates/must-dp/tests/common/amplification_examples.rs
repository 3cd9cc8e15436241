//! Reference amplification examples at n = 1000, m = 400, b = 500, as
//! printed (ε′, δ′) pairs for base ε = 0.05, 0.5, 1, 2, 3, 4.5.

pub const N: u64 = 1000;
pub const M: u64 = 400;
pub const B: u64 = 500;
pub const EPS: [f64; 6] = [0.05, 0.5, 1.0, 2.0, 3.0, 4.5];

pub struct Block {
    pub family: &'static str,
    pub theta: f64,
    /// Base mechanism `(ε, δ)` row.
    pub base: [(&'static str, &'static str); 6],
    /// `(scheme, row)`; scheme is one of wor, wr, mustow, mustww.
    pub rows: [(&'static str, [(&'static str, &'static str); 6]); 4],
}

pub const BLOCKS: [Block; 4] = [
    Block {
        family: "laplace",
        theta: 0.25,
        base: [("0.050", "0.095"), ("0.500", "0"), ("1.000", "0"), ("2.000", "0"), ("3.000", "0"), ("4.500", "0")],
        rows: [
            ("wor", [("0.020", "0.038"), ("0.231", "0"), ("0.523", "0"), ("1.269", "0"), ("2.156", "0"), ("3.600", "0")]),
            ("wr", [("0.017", "0.039"), ("0.194", "0.001"), ("0.449", "7.47e-6"), ("1.134", "5.65e-11"), ("1.987", "7.44e-17"), ("3.413", "1.22e-26")]),
            ("mustow", [("0.014", "0.039"), ("0.164", "0.003"), ("0.388", "9.18e-5"), ("1.015", "1.06e-8"), ("1.834", "2.18e-13"), ("3.240", "2.26e-21")]),
            ("mustww", [("0.012", "0.039"), ("0.145", "0.006"), ("0.346", "6.07e-4"), ("0.932", "4.05e-6"), ("1.722", "1.84e-8"), ("3.111", "3.44e-12")]),
        ],
    },
    Block {
        family: "gaussian",
        theta: 0.25,
        base: [("0.050", "0.078"), ("0.500", "0.003"), ("1.000", "2.92e-6"), ("2.000", "5.09e-17"), ("3.000", "1.62e-34"), ("4.500", "1.27e-73")],
        rows: [
            ("wor", [("0.020", "0.031"), ("0.231", "0.001"), ("0.523", "1.17e-6"), ("1.269", "2.04e-17"), ("2.156", "6.50e-35"), ("3.600", "5.06e-74")]),
            ("wr", [("0.017", "0.033"), ("0.194", "0.005"), ("0.449", "0.001"), ("1.134", "3.59e-5"), ("1.987", "2.17e-6"), ("3.413", "4.64e-8")]),
            ("mustow", [("0.014", "0.034"), ("0.164", "0.008"), ("0.388", "0.002"), ("1.015", "1.79e-4"), ("1.834", "1.89e-5"), ("3.240", "8.28e-7")]),
            ("mustww", [("0.012", "0.034"), ("0.145", "0.011"), ("0.346", "0.004"), ("0.932", "6.21e-4"), ("1.722", "1.31e-4"), ("3.111", "1.66e-5")]),
        ],
    },
    Block {
        family: "laplace",
        theta: 1.0,
        base: [("0.050", "0.378"), ("0.500", "0.221"), ("1.000", "0"), ("2.000", "0"), ("3.000", "0"), ("4.500", "0")],
        rows: [
            ("wor", [("0.020", "0.151"), ("0.231", "0.088"), ("0.523", "0"), ("1.269", "0"), ("2.156", "0"), ("3.600", "0")]),
            ("wr", [("0.017", "0.141"), ("0.194", "0.093"), ("0.449", "0.026"), ("1.134", "0.003"), ("1.987", "3.17e-4"), ("3.413", "1.45e-5")]),
            ("mustow", [("0.014", "0.132"), ("0.164", "0.095"), ("0.388", "0.044"), ("1.015", "0.010"), ("1.834", "0.002"), ("3.240", "1.83e-4")]),
            ("mustww", [("0.012", "0.123"), ("0.145", "0.094"), ("0.346", "0.052"), ("0.932", "0.018"), ("1.722", "0.006"), ("3.111", "0.001")]),
        ],
    },
    Block {
        family: "gaussian",
        theta: 1.0,
        base: [("0.050", "0.368"), ("0.500", "0.238"), ("1.000", "0.127"), ("2.000", "0.021"), ("3.000", "0.002"), ("4.500", "5.87e-6")],
        rows: [
            ("wor", [("0.020", "0.147"), ("0.231", "0.095"), ("0.523", "0.051"), ("1.269", "0.008"), ("2.156", "6.15e-4"), ("3.600", "2.35e-6")]),
            ("wr", [("0.017", "0.142"), ("0.194", "0.103"), ("0.449", "0.068"), ("1.134", "0.029"), ("1.987", "0.015"), ("3.413", "0.006")]),
            ("mustow", [("0.014", "0.136"), ("0.164", "0.106"), ("0.388", "0.079"), ("1.015", "0.045"), ("1.834", "0.028"), ("3.240", "0.015")]),
            // This row repeats the Laplace θ = 1 MUSTww row verbatim and is
            // checked against numeric integration instead.
            ("mustww", [("0.012", "0.123"), ("0.145", "0.094"), ("0.346", "0.052"), ("0.932", "0.018"), ("1.722", "0.006"), ("3.111", "0.001")]),
        ],
    },
];

/// The one row known to be a copy of another.
pub fn is_suspect(family: &str, theta: f64, scheme: &str) -> bool {
    family == "gaussian" && theta == 1.0 && scheme == "mustww"
}
