//! Class taxonomy: detector input classes, semantic output ids and the
//! fusion priority order.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Object class attached to an input bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputClass {
    Vehicle,
    Pedestrian,
    Cyclist,
    Sign,
}

impl InputClass {
    pub const ALL: [InputClass; 4] = [
        InputClass::Vehicle,
        InputClass::Pedestrian,
        InputClass::Cyclist,
        InputClass::Sign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputClass::Vehicle => "vehicle",
            InputClass::Pedestrian => "pedestrian",
            InputClass::Cyclist => "cyclist",
            InputClass::Sign => "sign",
        }
    }

    /// Pedestrians and cyclists collapse into [`OutputClass::Human`].
    pub fn output_class(self) -> OutputClass {
        match self {
            InputClass::Vehicle => OutputClass::Vehicle,
            InputClass::Sign => OutputClass::Sign,
            InputClass::Pedestrian | InputClass::Cyclist => OutputClass::Human,
        }
    }
}

impl fmt::Display for InputClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InputClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or(Error::UnknownClass)
    }
}

/// Semantic label stored in a mask cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum OutputClass {
    Background = 0,
    Vehicle = 1,
    Sign = 2,
    Human = 3,
}

/// Number of real classes (Background included). Ignore is not a class.
pub const NUM_CLASSES: usize = 4;

/// Mask value for pixels excluded from supervision and metrics.
pub const IGNORE: u8 = 255;

impl OutputClass {
    pub const ALL: [OutputClass; NUM_CLASSES] = [
        OutputClass::Background,
        OutputClass::Vehicle,
        OutputClass::Sign,
        OutputClass::Human,
    ];

    pub const FOREGROUND: [OutputClass; 3] =
        [OutputClass::Vehicle, OutputClass::Sign, OutputClass::Human];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_id(id: u8) -> Option<OutputClass> {
        match id {
            0 => Some(OutputClass::Background),
            1 => Some(OutputClass::Vehicle),
            2 => Some(OutputClass::Sign),
            3 => Some(OutputClass::Human),
            _ => None,
        }
    }

    /// Fusion rank. Human > Sign > Vehicle > Background.
    pub fn priority(self) -> u8 {
        match self {
            OutputClass::Background => 0,
            OutputClass::Vehicle => 1,
            OutputClass::Sign => 2,
            OutputClass::Human => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputClass::Background => "background",
            OutputClass::Vehicle => "vehicle",
            OutputClass::Sign => "sign",
            OutputClass::Human => "human",
        }
    }
}

impl fmt::Display for OutputClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Priority of a raw mask cell. Ignore never wins a fusion conflict.
pub fn label_priority(label: u8) -> Option<u8> {
    OutputClass::from_id(label).map(OutputClass::priority)
}

/// Weather stratum of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    DayFair,
    DayRain,
    NightFair,
    NightRain,
    Snow,
}

impl Weather {
    pub const ALL: [Weather; 5] = [
        Weather::DayFair,
        Weather::DayRain,
        Weather::NightFair,
        Weather::NightRain,
        Weather::Snow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::DayFair => "day_fair",
            Weather::DayRain => "day_rain",
            Weather::NightFair => "night_fair",
            Weather::NightRain => "night_rain",
            Weather::Snow => "snow",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Weather::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or(Error::UnknownWeather)
    }
}
