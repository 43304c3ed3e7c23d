//! The ten gesture classes and their stable integer ids.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of gesture classes the classifier distinguishes.
pub const NUM_GESTURES: usize = 10;

/// A hand/wrist gesture class.
///
/// The discriminant is the class id used by the classifier output layer and
/// by every file format in this crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Gesture {
    #[serde(rename = "Rest")]
    Rest = 0,
    #[serde(rename = "Fingers Closed")]
    FingersClosed = 1,
    #[serde(rename = "Fingers Open")]
    FingersOpen = 2,
    #[serde(rename = "Wrist Left")]
    WristLeft = 3,
    #[serde(rename = "Wrist Right")]
    WristRight = 4,
    #[serde(rename = "Wrist Up")]
    WristUp = 5,
    #[serde(rename = "Wrist Down")]
    WristDown = 6,
    #[serde(rename = "Palm Down")]
    PalmDown = 7,
    #[serde(rename = "Palm Up")]
    PalmUp = 8,
    #[serde(rename = "Pinch Fingers")]
    PinchFingers = 9,
}

impl Gesture {
    pub const ALL: [Gesture; NUM_GESTURES] = [
        Gesture::Rest,
        Gesture::FingersClosed,
        Gesture::FingersOpen,
        Gesture::WristLeft,
        Gesture::WristRight,
        Gesture::WristUp,
        Gesture::WristDown,
        Gesture::PalmDown,
        Gesture::PalmUp,
        Gesture::PinchFingers,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Gesture> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Gesture::Rest => "Rest",
            Gesture::FingersClosed => "Fingers Closed",
            Gesture::FingersOpen => "Fingers Open",
            Gesture::WristLeft => "Wrist Left",
            Gesture::WristRight => "Wrist Right",
            Gesture::WristUp => "Wrist Up",
            Gesture::WristDown => "Wrist Down",
            Gesture::PalmDown => "Palm Down",
            Gesture::PalmUp => "Palm Up",
            Gesture::PinchFingers => "Pinch Fingers",
        }
    }

    /// Label table in class-id order, as persisted in model bundles.
    pub fn label_table() -> Vec<String> {
        Self::ALL.iter().map(|g| g.name().to_string()).collect()
    }
}

impl fmt::Display for Gesture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gesture {
    type Err = Error;

    /// Accepts the display name ("Wrist Up"), snake/kebab case ("wrist_up"),
    /// or the numeric id.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(id) = s.trim().parse::<usize>() {
            return Gesture::from_id(id)
                .ok_or_else(|| Error::InvalidParameter(format!("gesture id {id} out of range")));
        }
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        Gesture::ALL
            .iter()
            .copied()
            .find(|g| g.name().replace(' ', "").to_lowercase() == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown gesture '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_names_are_a_bijection() {
        for (i, g) in Gesture::ALL.iter().enumerate() {
            assert_eq!(g.id(), i);
            assert_eq!(Gesture::from_id(i), Some(*g));
            assert_eq!(g.name().parse::<Gesture>().unwrap(), *g);
        }
        let mut names: Vec<_> = Gesture::ALL.iter().map(|g| g.name()).collect();
        names.dedup();
        assert_eq!(names.len(), NUM_GESTURES);
        assert_eq!(Gesture::from_id(NUM_GESTURES), None);
    }

    #[test]
    fn parses_loose_spellings() {
        assert_eq!("wrist_up".parse::<Gesture>().unwrap(), Gesture::WristUp);
        assert_eq!("pinch-fingers".parse::<Gesture>().unwrap(), Gesture::PinchFingers);
        assert_eq!("7".parse::<Gesture>().unwrap(), Gesture::PalmDown);
        assert!("thumbs up".parse::<Gesture>().is_err());
    }

    #[test]
    fn serde_uses_display_names() {
        let s = serde_json::to_string(&Gesture::FingersClosed).unwrap();
        assert_eq!(s, "\"Fingers Closed\"");
        let g: Gesture = serde_json::from_str("\"Palm Up\"").unwrap();
        assert_eq!(g, Gesture::PalmUp);
    }
}
