#![allow(dead_code)]

//! Reference two-period lattice values, in the reference row order (date-1 spot descending,
//! date-2 spot descending within each node).

use bhedge::accounting::Payoff;
use bhedge::lattice::LatticeStrategy;

pub const Q: f64 = 0.4;

pub const STRANGLE: Payoff<f64> = Payoff::Strangle {
    call_strike: 0.8,
    put_strike: 1.3,
};

/// Date-1 holdings, date-1 spot descending.
pub const GLOBAL_DELTA1: [f64; 5] = [0.9217, 0.5203, 0.0650, -0.3733, -0.8671];
pub const BACKWARD_DELTA1: [f64; 5] = [0.9217, 0.6351, 0.2850, -0.2353, -0.5567];
pub const GLOBAL_DELTA0: f64 = 0.1468;
pub const BACKWARD_DELTA0: f64 = 0.1468;

pub const GLOBAL_CVAR02: f64 = 0.7180;
pub const BACKWARD_CVAR02: f64 = 0.7314;

/// Per date-1 node, spot descending: (global, backward).
pub const CVAR12: [(f64, f64); 5] = [
    (0.8513, 0.8513),
    (0.7095, 0.6982),
    (0.6555, 0.6376),
    (0.6504, 0.6412),
    (0.7225, 0.7056),
];

/// (S₁, S₂, payoff, global PL₀², global PL₁², backward PL₀², backward PL₁²).
pub const PL_ROWS: [[f64; 7]; 25] = [
    [1.4918, 2.2255, 1.4255, -0.6771, -0.7493, -0.6771, -0.7493],
    [1.4918, 1.8221, 1.0221, -0.6455, -0.7177, -0.6455, -0.7177],
    [1.4918, 1.4918, 0.6918, -0.6196, -0.6918, -0.6196, -0.6918],
    [1.4918, 1.2214, 0.5000, -0.6771, -0.7493, -0.6771, -0.7493],
    [1.4918, 1.0000, 0.5000, -0.8811, -0.9533, -0.8811, -0.9533],
    [1.2214, 1.8221, 1.0221, -0.6770, -0.7095, -0.6081, -0.6406],
    [1.2214, 1.4918, 0.6918, -0.5186, -0.5511, -0.4876, -0.5201],
    [1.2214, 1.2214, 0.5000, -0.4675, -0.5000, -0.4675, -0.5000],
    [1.2214, 1.0000, 0.5000, -0.5827, -0.6152, -0.6081, -0.6406],
    [1.2214, 0.8187, 0.5000, -0.6770, -0.7095, -0.7232, -0.7557],
    [1.0000, 1.4918, 0.6918, -0.6599, -0.6599, -0.5517, -0.5517],
    [1.0000, 1.2214, 0.5000, -0.4856, -0.4856, -0.4369, -0.4369],
    [1.0000, 1.0000, 0.5000, -0.5000, -0.5000, -0.5000, -0.5000],
    [1.0000, 0.8187, 0.5000, -0.5118, -0.5118, -0.5517, -0.5517],
    [1.0000, 0.6703, 0.6297, -0.6511, -0.6511, -0.7236, -0.7236],
    [0.8187, 1.2214, 0.5000, -0.6769, -0.6503, -0.6214, -0.5948],
    [0.8187, 1.0000, 0.5000, -0.5943, -0.5677, -0.5693, -0.5427],
    [0.8187, 0.8187, 0.5000, -0.5266, -0.5000, -0.5266, -0.5000],
    [0.8187, 0.6703, 0.6297, -0.6009, -0.5743, -0.6214, -0.5948],
    [0.8187, 0.5488, 0.7512, -0.6770, -0.6504, -0.7143, -0.6877],
    [0.6703, 1.0000, 0.5000, -0.8343, -0.7859, -0.7319, -0.6835],
    [0.6703, 0.8187, 0.5000, -0.6771, -0.6287, -0.6310, -0.5826],
    [0.6703, 0.6703, 0.6297, -0.6781, -0.6297, -0.6781, -0.6297],
    [0.6703, 0.5488, 0.7512, -0.6942, -0.6458, -0.7319, -0.6835],
    [0.6703, 0.4493, 0.8507, -0.7074, -0.6590, -0.7760, -0.7276],
];

/// Reference row order → (node, branch) in ascending lattice order.
pub fn lattice_index(row: usize) -> (usize, usize) {
    (4 - row / 5, 4 - row % 5)
}

/// Reference date-1 order is descending; the lattice is ascending.
pub fn ascending(d: [f64; 5]) -> [f64; 5] {
    [d[4], d[3], d[2], d[1], d[0]]
}

pub fn reference_global() -> LatticeStrategy {
    LatticeStrategy {
        delta0: GLOBAL_DELTA0,
        delta1: ascending(GLOBAL_DELTA1),
    }
}

pub fn reference_backward() -> LatticeStrategy {
    LatticeStrategy {
        delta0: BACKWARD_DELTA0,
        delta1: ascending(BACKWARD_DELTA1),
    }
}
