//! Versioned JSON serialization of trained models.
//!
//! A model file holds the configuration and every probability as a
//! `{"key": ..., "logp": ...}` record, where `logp` is `null` for a zero
//! probability. Records appear in a fixed order. Keys:
//!
//! ```text
//! RH/initial/3                      P(first digit = 3)
//! RH/transition/2/1,4>5             ML P(5 | 1,4), order-2 table
//! RH/output/1/2>3/+4,+1             lag-1 factor F(dx=+4, dy=+1; 2, 3)
//! RH/prior/3                        chord model: first-chord digit prior
//! RH/across-fingers/2>3             chord model: P(3 | 2) across chords
//! RH/within-fingers/2>3             chord model: P(3 | 2) within a chord
//! RH/across-output/2>3/+4,+1        chord model output factors
//! RH/within-output/2>3/+4,+1
//! ```
//!
//! The left hand uses the prefix `LH`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chord_hmm::{ChordHandTables, ChordHmmModel, ChordHmmParams};
use crate::corpus::Estimator;
use crate::error::{Error, Result};
use crate::note_hmm::{decode_context, HandTables, NoteHmmConfig, NoteHmmModel};
use crate::pairwise::{PairTable, DIGITS, PAIRS};
use crate::pig_io::Hand;
use crate::pitch_space::{DisplacementAlphabet, PitchRepr};

pub const FORMAT: &str = "piano-fingering-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Record {
    key: String,
    logp: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Header {
    NoteHmm { config: NoteHmmConfig },
    ChordHmm { params: ChordHmmParams },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    #[serde(flatten)]
    header: Header,
    tables: Vec<Record>,
}

fn pair_key(pair: usize) -> String {
    format!("{}>{}", pair / DIGITS + 1, pair % DIGITS + 1)
}

fn digits_key(digits: &[u8]) -> String {
    digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

/// Visits every probability slot of a model in file order.
trait Slots {
    fn visit(&mut self, key: String, slot: &mut f64) -> Result<()>;

    fn table(&mut self, prefix: &str, table: &mut [f64], alphabet: &DisplacementAlphabet) -> Result<()> {
        let a = alphabet.len();
        for pair in 0..PAIRS {
            for (cell, d) in alphabet.cells().iter().enumerate() {
                self.visit(format!("{prefix}/{}/{d}", pair_key(pair)), &mut table[pair * a + cell])?;
            }
        }
        Ok(())
    }
}

struct Writer(Vec<Record>);

impl Slots for Writer {
    fn visit(&mut self, key: String, slot: &mut f64) -> Result<()> {
        let logp = (*slot > 0.0).then(|| slot.ln());
        self.0.push(Record { key, logp });
        Ok(())
    }
}

struct Reader(HashMap<String, Option<f64>>);

impl Slots for Reader {
    fn visit(&mut self, key: String, slot: &mut f64) -> Result<()> {
        let logp = self
            .0
            .remove(&key)
            .ok_or_else(|| Error::ModelFormat(format!("missing record {key}")))?;
        *slot = match logp {
            None => 0.0,
            Some(l) if l.is_finite() && l <= 1e-12 => l.exp().min(1.0),
            Some(l) => return Err(Error::ModelFormat(format!("record {key} has log-probability {l}"))),
        };
        Ok(())
    }
}

struct NoteSlots {
    initial: [f64; DIGITS],
    transitions: Vec<Vec<[f64; DIGITS]>>,
    outputs: Vec<Vec<f64>>,
}

impl NoteSlots {
    fn zeros(order: usize, alphabet: &DisplacementAlphabet) -> NoteSlots {
        NoteSlots {
            initial: [0.0; DIGITS],
            transitions: (1..=order).map(|l| vec![[0.0; DIGITS]; DIGITS.pow(l as u32)]).collect(),
            outputs: vec![vec![0.0; PAIRS * alphabet.len()]; order],
        }
    }

    fn from_tables(t: &HandTables) -> NoteSlots {
        NoteSlots {
            initial: t.initial,
            transitions: t.ml_transitions.clone(),
            outputs: t.outputs.iter().map(|o| o.probs().to_vec()).collect(),
        }
    }

    fn walk(&mut self, hand: Hand, alphabet: &DisplacementAlphabet, s: &mut impl Slots) -> Result<()> {
        for (d, p) in self.initial.iter_mut().enumerate() {
            s.visit(format!("{hand}/initial/{}", d + 1), p)?;
        }
        for (l, table) in self.transitions.iter_mut().enumerate() {
            for (code, row) in table.iter_mut().enumerate() {
                let context = digits_key(&decode_context(code, l + 1));
                for (d, p) in row.iter_mut().enumerate() {
                    s.visit(format!("{hand}/transition/{}/{context}>{}", l + 1, d + 1), p)?;
                }
            }
        }
        for (l, table) in self.outputs.iter_mut().enumerate() {
            s.table(&format!("{hand}/output/{}", l + 1), table, alphabet)?;
        }
        Ok(())
    }

    fn into_tables(self, alphabet: &DisplacementAlphabet) -> Result<HandTables> {
        Ok(HandTables {
            initial: self.initial,
            ml_transitions: self.transitions,
            outputs: self
                .outputs
                .into_iter()
                .map(|p| PairTable::from_probs_checked(alphabet.clone(), p))
                .collect::<Result<_>>()?,
        })
    }
}

struct ChordSlots {
    prior: [f64; DIGITS],
    across_fingers: [[f64; DIGITS]; DIGITS],
    within_fingers: [[f64; DIGITS]; DIGITS],
    across_outputs: Vec<f64>,
    within_outputs: Vec<f64>,
}

impl ChordSlots {
    fn zeros(alphabet: &DisplacementAlphabet) -> ChordSlots {
        ChordSlots {
            prior: [0.0; DIGITS],
            across_fingers: [[0.0; DIGITS]; DIGITS],
            within_fingers: [[0.0; DIGITS]; DIGITS],
            across_outputs: vec![0.0; PAIRS * alphabet.len()],
            within_outputs: vec![0.0; PAIRS * alphabet.len()],
        }
    }

    fn from_tables(t: &ChordHandTables) -> ChordSlots {
        ChordSlots {
            prior: t.prior,
            across_fingers: t.across_fingers,
            within_fingers: t.within_fingers,
            across_outputs: t.across_outputs.probs().to_vec(),
            within_outputs: t.within_outputs.probs().to_vec(),
        }
    }

    fn walk(&mut self, hand: Hand, alphabet: &DisplacementAlphabet, s: &mut impl Slots) -> Result<()> {
        for (d, p) in self.prior.iter_mut().enumerate() {
            s.visit(format!("{hand}/prior/{}", d + 1), p)?;
        }
        for (name, table) in [("across-fingers", &mut self.across_fingers), ("within-fingers", &mut self.within_fingers)] {
            for (from, row) in table.iter_mut().enumerate() {
                for (to, p) in row.iter_mut().enumerate() {
                    s.visit(format!("{hand}/{name}/{}", pair_key(from * DIGITS + to)), p)?;
                }
            }
        }
        s.table(&format!("{hand}/across-output"), &mut self.across_outputs, alphabet)?;
        s.table(&format!("{hand}/within-output"), &mut self.within_outputs, alphabet)
    }

    fn into_tables(self, alphabet: &DisplacementAlphabet) -> Result<ChordHandTables> {
        Ok(ChordHandTables {
            prior: self.prior,
            across_fingers: self.across_fingers,
            within_fingers: self.within_fingers,
            across_outputs: PairTable::from_probs_checked(alphabet.clone(), self.across_outputs)?,
            within_outputs: PairTable::from_probs_checked(alphabet.clone(), self.within_outputs)?,
        })
    }
}

pub fn to_json(model: &Estimator) -> Result<String> {
    let mut writer = Writer(Vec::new());
    let header = match model {
        Estimator::NoteHmm(m) => {
            let c = m.config();
            let alphabet = DisplacementAlphabet::new(c.pitch_repr, c.delta_p_max);
            for hand in Hand::BOTH {
                NoteSlots::from_tables(m.tables(hand)).walk(hand, &alphabet, &mut writer)?;
            }
            Header::NoteHmm { config: c.clone() }
        }
        Estimator::ChordHmm(m) => {
            let alphabet = DisplacementAlphabet::new(PitchRepr::Lattice, m.params().delta_p_max);
            for hand in Hand::BOTH {
                ChordSlots::from_tables(m.tables(hand)).walk(hand, &alphabet, &mut writer)?;
            }
            Header::ChordHmm {
                params: m.params().clone(),
            }
        }
    };
    let envelope = Envelope {
        format: FORMAT.into(),
        version: VERSION,
        header,
        tables: writer.0,
    };
    Ok(serde_json::to_string_pretty(&envelope)?)
}

pub fn from_json(text: &str) -> Result<Estimator> {
    let envelope: Envelope = serde_json::from_str(text)?;
    if envelope.format != FORMAT {
        return Err(Error::ModelFormat(format!("unknown format {:?}", envelope.format)));
    }
    if envelope.version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", envelope.version)));
    }
    let as_format = |e: Error| match e {
        Error::InvalidConfig(msg) => Error::ModelFormat(msg),
        other => other,
    };
    let expected = envelope.tables.len();
    let mut reader = Reader(HashMap::with_capacity(expected));
    for r in envelope.tables {
        if reader.0.insert(r.key.clone(), r.logp).is_some() {
            return Err(Error::ModelFormat(format!("duplicate record {}", r.key)));
        }
    }
    let model = match envelope.header {
        Header::NoteHmm { config } => {
            config.validate().map_err(as_format)?;
            let alphabet = DisplacementAlphabet::new(config.pitch_repr, config.delta_p_max);
            let mut hands = Vec::with_capacity(2);
            for hand in Hand::BOTH {
                let mut slots = NoteSlots::zeros(config.order, &alphabet);
                slots.walk(hand, &alphabet, &mut reader)?;
                hands.push(slots.into_tables(&alphabet).map_err(as_format)?);
            }
            let [r, l]: [HandTables; 2] = hands.try_into().expect("two hands");
            Estimator::NoteHmm(NoteHmmModel::from_tables(config, [r, l]).map_err(as_format)?)
        }
        Header::ChordHmm { params } => {
            params.validate().map_err(as_format)?;
            let alphabet = DisplacementAlphabet::new(PitchRepr::Lattice, params.delta_p_max);
            let mut hands = Vec::with_capacity(2);
            for hand in Hand::BOTH {
                let mut slots = ChordSlots::zeros(&alphabet);
                slots.walk(hand, &alphabet, &mut reader)?;
                hands.push(slots.into_tables(&alphabet).map_err(as_format)?);
            }
            let [r, l]: [ChordHandTables; 2] = hands.try_into().expect("two hands");
            Estimator::ChordHmm(ChordHmmModel::from_tables(params, [r, l]).map_err(as_format)?)
        }
    };
    if let Some(key) = reader.0.keys().min() {
        return Err(Error::ModelFormat(format!("unexpected record {key}")));
    }
    Ok(model)
}

pub fn save(model: &Estimator, path: &Path) -> Result<()> {
    let text = to_json(model)?;
    fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

pub fn load(path: &Path) -> Result<Estimator> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    from_json(&text).map_err(|e| e.in_file(path))
}
