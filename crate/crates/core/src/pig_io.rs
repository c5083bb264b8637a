//! Reading and writing PIG fingering files.
//!
//! A fingering file lists one note per line, ordered by onset:
//!
//! ```text
//! id  onset  offset  pitch  onset_velocity  offset_velocity  channel  finger
//! ```
//!
//! Channel 0 is the right hand, channel 1 the left hand. Fingers are signed
//! digits (positive for the right hand, negative for the left hand); a
//! substitution such as `1_2` is resolved to the finger that strikes the key.
//! Lines starting with `//` are comments.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOWEST_MIDI: u8 = 21;
pub const HIGHEST_MIDI: u8 = 108;

/// Time tolerance used when comparing note content across annotators.
const TIME_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hand {
    Right,
    Left,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Right, Hand::Left];

    pub fn channel(self) -> u8 {
        match self {
            Hand::Right => 0,
            Hand::Left => 1,
        }
    }

    pub fn from_channel(channel: u8) -> Option<Hand> {
        match channel {
            0 => Some(Hand::Right),
            1 => Some(Hand::Left),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.channel() as usize
    }

    pub fn other(self) -> Hand {
        match self {
            Hand::Right => Hand::Left,
            Hand::Left => Hand::Right,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hand::Right => "RH",
            Hand::Left => "LH",
        })
    }
}

/// A finger of one hand; `digit` runs from 1 (thumb) to 5 (little finger).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FingerLabel {
    pub hand: Hand,
    pub digit: u8,
}

impl FingerLabel {
    pub fn new(hand: Hand, digit: u8) -> Option<FingerLabel> {
        (1..=5).contains(&digit).then_some(FingerLabel { hand, digit })
    }

    /// Decodes the signed file convention: positive is RH, negative LH.
    pub fn from_signed(value: i64) -> Option<FingerLabel> {
        let hand = if value > 0 { Hand::Right } else { Hand::Left };
        let digit = u8::try_from(value.unsigned_abs()).ok()?;
        if value == 0 {
            return None;
        }
        FingerLabel::new(hand, digit)
    }

    pub fn signed(self) -> i8 {
        match self.hand {
            Hand::Right => self.digit as i8,
            Hand::Left => -(self.digit as i8),
        }
    }
}

impl fmt::Display for FingerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.signed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub id: usize,
    pub onset: f64,
    pub offset: f64,
    /// MIDI note number, 21..=108.
    pub pitch: u8,
    /// Pitch token as written in the source file.
    pub spelling: String,
    pub onset_velocity: u8,
    pub offset_velocity: u8,
    pub hand: Hand,
    pub finger: Option<FingerLabel>,
}

impl Note {
    /// Returns a copy shifted by `semitones`, re-spelled with sharps.
    pub fn transposed(&self, semitones: i32) -> Result<Note> {
        let midi = self.pitch as i32 + semitones;
        check_midi(midi)?;
        Ok(Note {
            pitch: midi as u8,
            spelling: spell_midi(midi as u8),
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub id: String,
    pub annotator: Option<String>,
    pub notes: Vec<Note>,
}

impl Piece {
    pub fn new(id: impl Into<String>, notes: Vec<Note>) -> Piece {
        Piece {
            id: id.into(),
            annotator: None,
            notes,
        }
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn fingers(&self) -> Option<Vec<FingerLabel>> {
        self.notes.iter().map(|n| n.finger).collect()
    }

    /// Indices of the notes of `hand` in canonical order: by onset, then by
    /// ascending pitch among equal onsets.
    pub fn hand_indices(&self, hand: Hand) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.notes.len())
            .filter(|&i| self.notes[i].hand == hand)
            .collect();
        idx.sort_by(|&a, &b| {
            let (na, nb) = (&self.notes[a], &self.notes[b]);
            na.onset
                .total_cmp(&nb.onset)
                .then(na.pitch.cmp(&nb.pitch))
        });
        idx
    }

    /// The notes of one hand in canonical order, as a piece of its own.
    pub fn hand_part(&self, hand: Hand) -> Piece {
        Piece {
            id: self.id.clone(),
            annotator: self.annotator.clone(),
            notes: self
                .hand_indices(hand)
                .into_iter()
                .map(|i| self.notes[i].clone())
                .collect(),
        }
    }

    pub fn without_fingers(&self) -> Piece {
        let mut p = self.clone();
        for n in &mut p.notes {
            n.finger = None;
        }
        p
    }
}

/// Splits a piece by channel into (right hand, left hand), each in canonical order.
pub fn split_hands(piece: &Piece) -> (Piece, Piece) {
    (piece.hand_part(Hand::Right), piece.hand_part(Hand::Left))
}

fn check_midi(midi: i32) -> Result<()> {
    if (LOWEST_MIDI as i32..=HIGHEST_MIDI as i32).contains(&midi) {
        Ok(())
    } else {
        Err(Error::PitchOutOfRange(midi))
    }
}

/// Parses a spelled pitch such as `C4`, `F#4`, `Bb3`, `Cx2`, or a bare MIDI
/// number. `C4` is MIDI 60.
pub fn parse_pitch(token: &str) -> Option<u8> {
    if let Ok(midi) = token.parse::<i32>() {
        return check_midi(midi).ok().map(|_| midi as u8);
    }
    let mut chars = token.chars();
    let class = match chars.next()? {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let rest = chars.as_str();
    let split = rest
        .find(|c: char| c.is_ascii_digit() || c == '-')
        .unwrap_or(rest.len());
    let (accidentals, octave) = rest.split_at(split);
    let alter = match accidentals {
        "" => 0,
        "#" => 1,
        "##" | "x" => 2,
        "b" => -1,
        "bb" => -2,
        _ => return None,
    };
    let octave: i32 = octave.parse().ok()?;
    let midi = 12 * (octave + 1) + class + alter;
    check_midi(midi).ok().map(|_| midi as u8)
}

/// Spells a MIDI number with sharps, e.g. 61 -> `C#4`.
pub fn spell_midi(midi: u8) -> String {
    const NAMES: [&str; 12] = [
        "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
    ];
    let octave = midi as i32 / 12 - 1;
    format!("{}{}", NAMES[midi as usize % 12], octave)
}

/// Resolves a finger token, keeping only the first finger of a substitution.
pub fn resolve_substitution(token: &str) -> Result<FingerLabel> {
    let invalid = || Error::InvalidFinger {
        line: 0,
        token: token.to_string(),
    };
    let mut parts = token.split('_');
    let first = parts.next().ok_or_else(invalid)?;
    let first = FingerLabel::from_signed(first.parse().map_err(|_| invalid())?).ok_or_else(invalid)?;
    if let Some(second) = parts.next() {
        let second =
            FingerLabel::from_signed(second.parse().map_err(|_| invalid())?).ok_or_else(invalid)?;
        if second.hand != first.hand || parts.next().is_some() {
            return Err(invalid());
        }
    }
    Ok(first)
}

fn parse_line(line_no: usize, line: &str) -> Result<Note> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 8 && fields.len() != 7 {
        return Err(Error::MalformedLine {
            line: line_no,
            reason: format!("expected 8 fields, found {}", fields.len()),
        });
    }
    let malformed = |what: &str, token: &str| Error::MalformedLine {
        line: line_no,
        reason: format!("bad {what} `{token}`"),
    };
    let id: usize = fields[0].parse().map_err(|_| malformed("note id", fields[0]))?;
    let onset: f64 = fields[1].parse().map_err(|_| malformed("onset", fields[1]))?;
    let offset: f64 = fields[2].parse().map_err(|_| malformed("offset", fields[2]))?;
    if !onset.is_finite() || !offset.is_finite() || offset < onset {
        return Err(malformed("offset", fields[2]));
    }
    let pitch = parse_pitch(fields[3]).ok_or_else(|| Error::InvalidPitchToken {
        line: line_no,
        token: fields[3].to_string(),
    })?;
    let velocity = |i: usize, what: &str| -> Result<u8> {
        fields[i]
            .parse::<u8>()
            .ok()
            .filter(|v| *v <= 127)
            .ok_or_else(|| malformed(what, fields[i]))
    };
    let onset_velocity = velocity(4, "onset velocity")?;
    let offset_velocity = velocity(5, "offset velocity")?;
    let channel: u8 = fields[6].parse().map_err(|_| malformed("channel", fields[6]))?;
    let hand = Hand::from_channel(channel).ok_or_else(|| malformed("channel", fields[6]))?;
    let finger = match fields.get(7) {
        None => None,
        Some(token) => {
            let label = resolve_substitution(token).map_err(|_| Error::InvalidFinger {
                line: line_no,
                token: token.to_string(),
            })?;
            if label.hand != hand {
                return Err(Error::HandMismatch {
                    line: line_no,
                    channel,
                    finger: token.to_string(),
                });
            }
            Some(label)
        }
    };
    Ok(Note {
        id,
        onset,
        offset,
        pitch,
        spelling: fields[3].to_string(),
        onset_velocity,
        offset_velocity,
        hand,
        finger,
    })
}

/// Parses a fingering document. Notes keep file order; onsets must be
/// non-decreasing. A line with seven fields is accepted as an unannotated note.
pub fn parse_fingering_file(text: &str) -> Result<Piece> {
    let mut notes: Vec<Note> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let note = parse_line(i + 1, line)?;
        if let Some(prev) = notes.last() {
            if note.onset < prev.onset {
                return Err(Error::NonMonotoneOnsets {
                    line: i + 1,
                    onset: note.onset,
                    previous: prev.onset,
                });
            }
        }
        notes.push(note);
    }
    Ok(Piece {
        id: String::new(),
        annotator: None,
        notes,
    })
}

/// Writes a piece in tab-separated fingering-file format.
pub fn serialize_fingering_file(piece: &Piece) -> Result<String> {
    let mut out = String::new();
    for note in &piece.notes {
        let finger = note.finger.ok_or(Error::MissingFinger { id: note.id })?;
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}",
            note.id,
            note.onset,
            note.offset,
            note.spelling,
            note.onset_velocity,
            note.offset_velocity,
            note.hand.channel(),
            finger.signed()
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Several annotators' fingerings of the same notes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSet {
    pub piece_id: String,
    /// Note content shared by all annotators, in file order.
    pub notes: Vec<Note>,
    pub annotators: Vec<String>,
    pub fingerings: Vec<Vec<FingerLabel>>,
}

impl GroundTruthSet {
    pub fn from_pieces(piece_id: impl Into<String>, pieces: &[Piece]) -> Result<GroundTruthSet> {
        let first = pieces.first().ok_or(Error::InsufficientAnnotators {
            needed: 1,
            found: 0,
        })?;
        let mut fingerings = Vec::with_capacity(pieces.len());
        let mut annotators = Vec::with_capacity(pieces.len());
        for (g, piece) in pieces.iter().enumerate() {
            if piece.len() != first.len() {
                return Err(Error::LengthMismatch {
                    index: g,
                    expected: first.len(),
                    found: piece.len(),
                });
            }
            for (position, (a, b)) in first.notes.iter().zip(&piece.notes).enumerate() {
                if !same_content(a, b) {
                    return Err(Error::ContentMismatch { position });
                }
            }
            let fingers = piece.fingers().ok_or_else(|| {
                let id = piece.notes.iter().find(|n| n.finger.is_none()).map_or(0, |n| n.id);
                Error::MissingFinger { id }
            })?;
            fingerings.push(fingers);
            annotators.push(piece.annotator.clone().unwrap_or_else(|| (g + 1).to_string()));
        }
        Ok(GroundTruthSet {
            piece_id: piece_id.into(),
            notes: first.without_fingers().notes,
            annotators,
            fingerings,
        })
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn annotator_count(&self) -> usize {
        self.fingerings.len()
    }

    /// Piece carrying annotator `g`'s fingering.
    pub fn annotated_piece(&self, g: usize) -> Piece {
        let mut notes = self.notes.clone();
        for (n, f) in notes.iter_mut().zip(&self.fingerings[g]) {
            n.finger = Some(*f);
        }
        Piece {
            id: self.piece_id.clone(),
            annotator: Some(self.annotators[g].clone()),
            notes,
        }
    }

    pub fn piece(&self) -> Piece {
        Piece::new(self.piece_id.clone(), self.notes.clone())
    }
}

fn same_content(a: &Note, b: &Note) -> bool {
    a.pitch == b.pitch
        && a.hand == b.hand
        && (a.onset - b.onset).abs() <= TIME_TOLERANCE
        && (a.offset - b.offset).abs() <= TIME_TOLERANCE
}
