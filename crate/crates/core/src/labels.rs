use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Origin of a document. `Pubmed` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    Pubmed,
    Gpt,
}

impl Source {
    pub fn other(self) -> Source {
        match self {
            Source::Pubmed => Source::Gpt,
            Source::Gpt => Source::Pubmed,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Pubmed => "PUBMED",
            Source::Gpt => "GPT",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pubmed" => Ok(Source::Pubmed),
            "gpt" => Ok(Source::Gpt),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Disease {
    Alzheimers,
    Cancer,
    Depression,
}

impl Disease {
    pub const ALL: [Disease; 3] = [Disease::Alzheimers, Disease::Cancer, Disease::Depression];

    /// Name as it appears in generation prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            Disease::Alzheimers => "Alzheimer's",
            Disease::Cancer => "Cancer",
            Disease::Depression => "Depression",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Disease::Alzheimers => "ALZHEIMERS",
            Disease::Cancer => "CANCER",
            Disease::Depression => "DEPRESSION",
        }
    }
}

impl fmt::Display for Disease {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Disease {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('\'', "").as_str() {
            "alzheimers" | "alzheimer" => Ok(Disease::Alzheimers),
            "cancer" => Ok(Disease::Cancer),
            "depression" => Ok(Disease::Depression),
            other => Err(format!("unknown disease `{other}`")),
        }
    }
}

/// Five-year publication window of a PubMed pull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    #[serde(rename = "P2010_2014")]
    P2010_2014,
    #[serde(rename = "P2015_2019")]
    P2015_2019,
    #[serde(rename = "P2020_2024")]
    P2020_2024,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::P2010_2014, Period::P2015_2019, Period::P2020_2024];

    pub fn as_str(self) -> &'static str {
        match self {
            Period::P2010_2014 => "2010-2014",
            Period::P2015_2019 => "2015-2019",
            Period::P2020_2024 => "2020-2024",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_start_matches(['P', 'p']).replace('_', "-").as_str() {
            "2010-2014" => Ok(Period::P2010_2014),
            "2015-2019" => Ok(Period::P2015_2019),
            "2020-2024" => Ok(Period::P2020_2024),
            other => Err(format!("unknown period `{other}`")),
        }
    }
}
