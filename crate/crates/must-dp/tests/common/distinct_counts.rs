//! Reference distinct-record counts, 10,000 draws per configuration.
//! Columns: WOR, Poisson, WR, MUSTow, MUSTww. Each row is (min, mean, max).

pub struct Row {
    pub n: u64,
    pub b: u64,
    pub m: u64,
    pub min: [u64; 5],
    pub mean: [u64; 5],
    pub max: [u64; 5],
}

pub const SCHEMES: [&str; 5] = ["wor", "poisson", "wr", "mustow", "mustww"];

pub const ROWS: [Row; 4] = [
    Row { n: 300, b: 50, m: 30, min: [30, 14, 22, 15, 15], mean: [30, 30, 29, 23, 22], max: [30, 52, 30, 29, 29] },
    Row { n: 1000, b: 200, m: 100, min: [100, 61, 87, 67, 64], mean: [100, 100, 95, 79, 76], max: [100, 138, 100, 90, 87] },
    Row {
        n: 30969,
        b: 500,
        m: 300,
        min: [300, 241, 292, 204, 205],
        mean: [300, 300, 299, 226, 225],
        max: [300, 373, 300, 246, 250],
    },
    Row {
        n: 60000,
        b: 3000,
        m: 2000,
        min: [2000, 1839, 1945, 1409, 1378],
        mean: [2000, 2000, 1967, 1460, 1442],
        max: [2000, 2174, 1986, 1513, 1501],
    },
];
