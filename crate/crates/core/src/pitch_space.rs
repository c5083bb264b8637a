//! Pitch geometry: the semitone line and the two-row keyboard lattice.
//!
//! Lattice x coordinates use doubled units so that every key sits on an
//! integer: a white-key step is 2, a black key sits 1 unit right of the white
//! key below it. y is 1 for black keys and 0 for white keys.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pig_io::{HIGHEST_MIDI, LOWEST_MIDI};

pub const DEFAULT_DELTA_P_MAX: i32 = 15;

/// x offsets of the twelve pitch classes within one octave (period 14).
const CLASS_X: [i32; 12] = [0, 1, 2, 3, 4, 6, 7, 8, 9, 10, 11, 12];
const CLASS_BLACK: [bool; 12] = [
    false, true, false, true, false, false, true, false, true, false, true, false,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitchRepr {
    Integral,
    Lattice,
}

impl fmt::Display for PitchRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PitchRepr::Integral => "integral",
            PitchRepr::Lattice => "lattice",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    pub x: i32,
    pub y: i32,
}

pub fn is_black(midi: u8) -> bool {
    CLASS_BLACK[midi as usize % 12]
}

pub fn to_lattice(midi: i32) -> Result<LatticePoint> {
    if !(LOWEST_MIDI as i32..=HIGHEST_MIDI as i32).contains(&midi) {
        return Err(Error::PitchOutOfRange(midi));
    }
    let class = midi.rem_euclid(12) as usize;
    Ok(LatticePoint {
        x: 14 * midi.div_euclid(12) + CLASS_X[class],
        y: CLASS_BLACK[class] as i32,
    })
}

fn lattice_unchecked(midi: u8) -> LatticePoint {
    let class = midi as usize % 12;
    LatticePoint {
        x: 14 * (midi as i32 / 12) + CLASS_X[class],
        y: CLASS_BLACK[class] as i32,
    }
}

/// Relative motion between two pitches. `dy` is always 0 for the integral
/// representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: i32,
    pub dy: i32,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Displacement {
        Displacement { dx, dy }
    }
}

impl std::ops::Neg for Displacement {
    type Output = Displacement;
    fn neg(self) -> Displacement {
        Displacement {
            dx: -self.dx,
            dy: -self.dy,
        }
    }
}

impl fmt::Display for Displacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+},{:+}", self.dx, self.dy)
    }
}

/// Clamp bound on |dx| in the units of `repr`.
pub fn clamp_bound(repr: PitchRepr, delta_p_max: i32) -> i32 {
    match repr {
        PitchRepr::Integral => delta_p_max,
        PitchRepr::Lattice => 2 * delta_p_max,
    }
}

/// Motion from `from` to `to` (MIDI numbers), with |dx| clamped.
pub fn displacement(repr: PitchRepr, from: u8, to: u8, delta_p_max: i32) -> Displacement {
    let bound = clamp_bound(repr, delta_p_max);
    match repr {
        PitchRepr::Integral => Displacement {
            dx: (to as i32 - from as i32).clamp(-bound, bound),
            dy: 0,
        },
        PitchRepr::Lattice => {
            let (a, b) = (lattice_unchecked(from), lattice_unchecked(to));
            Displacement {
                dx: (b.x - a.x).clamp(-bound, bound),
                dy: b.y - a.y,
            }
        }
    }
}

/// Mirror in the x direction.
pub fn reflect_x(d: Displacement) -> Displacement {
    Displacement { dx: -d.dx, dy: d.dy }
}

/// The finite set of clamped displacements a model distributes mass over.
///
/// Integral: every dx in `[-B, B]`. Lattice: motions between keys of the same
/// colour have even dx, motions between colours have odd dx, and the clamp
/// endpoints `±B` occur with every dy. The set is closed under negation and
/// x-reflection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplacementAlphabet {
    repr: PitchRepr,
    bound: i32,
    cells: Vec<Displacement>,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl DisplacementAlphabet {
    pub fn new(repr: PitchRepr, delta_p_max: i32) -> DisplacementAlphabet {
        let bound = clamp_bound(repr, delta_p_max.max(0));
        let width = (2 * bound + 1) as usize;
        let mut cells = Vec::new();
        let mut lookup = vec![ABSENT; width * 3];
        let dys: &[i32] = match repr {
            PitchRepr::Integral => &[0],
            PitchRepr::Lattice => &[-1, 0, 1],
        };
        for &dy in dys {
            for dx in -bound..=bound {
                let member = match repr {
                    PitchRepr::Integral => true,
                    PitchRepr::Lattice => {
                        dx.abs() == bound || (dx.rem_euclid(2) == 0) == (dy == 0)
                    }
                };
                if member {
                    lookup[(dy + 1) as usize * width + (dx + bound) as usize] = cells.len() as u32;
                    cells.push(Displacement { dx, dy });
                }
            }
        }
        DisplacementAlphabet {
            repr,
            bound,
            cells,
            lookup,
        }
    }

    pub fn repr(&self) -> PitchRepr {
        self.repr
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Displacement] {
        &self.cells
    }

    pub fn index(&self, d: Displacement) -> Option<usize> {
        if d.dx.abs() > self.bound || d.dy.abs() > 1 {
            return None;
        }
        let width = (2 * self.bound + 1) as usize;
        let slot = self.lookup[(d.dy + 1) as usize * width + (d.dx + self.bound) as usize];
        (slot != ABSENT).then_some(slot as usize)
    }
}
