use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Books,
    Electronics,
    CDsAndVinyl,
    MoviesAndTV,
    Other(String),
}

impl Category {
    /// Short identifier used in file names and JSON.
    pub fn slug(&self) -> &str {
        match self {
            Category::Books => "books",
            Category::Electronics => "electronics",
            Category::CDsAndVinyl => "cds_and_vinyl",
            Category::MoviesAndTV => "movies_and_tv",
            Category::Other(name) => name,
        }
    }

    pub fn display_name(&self) -> &str {
        match self {
            Category::Books => "Books",
            Category::Electronics => "Electronics",
            Category::CDsAndVinyl => "CDs and Vinyl",
            Category::MoviesAndTV => "Movies and TV",
            Category::Other(name) => name,
        }
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match norm.as_str() {
            "books" => Category::Books,
            "electronics" => Category::Electronics,
            "cdsandvinyl" | "cds" | "cdsvinyl" => Category::CDsAndVinyl,
            "moviesandtv" | "movies" | "moviestv" | "moviesandtvs" => Category::MoviesAndTV,
            "" => return Err(Error::Config("empty category name".into())),
            _ => Category::Other(s.to_string()),
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.slug())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Binary helpfulness class. `Helpful` is class 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HelpfulnessLabel {
    Helpful,
    Unhelpful,
}

impl fmt::Display for HelpfulnessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HelpfulnessLabel::Helpful => "helpful",
            HelpfulnessLabel::Unhelpful => "unhelpful",
        })
    }
}

impl HelpfulnessLabel {
    pub const ALL: [HelpfulnessLabel; 2] = [HelpfulnessLabel::Helpful, HelpfulnessLabel::Unhelpful];

    pub fn class_index(self) -> usize {
        match self {
            HelpfulnessLabel::Helpful => 0,
            HelpfulnessLabel::Unhelpful => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Self {
        if i == 0 {
            HelpfulnessLabel::Helpful
        } else {
            HelpfulnessLabel::Unhelpful
        }
    }

    /// +1 for helpful, -1 for unhelpful.
    pub fn sign(self) -> f64 {
        match self {
            HelpfulnessLabel::Helpful => 1.0,
            HelpfulnessLabel::Unhelpful => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HelpfulnessLabel::Helpful => "helpful",
            HelpfulnessLabel::Unhelpful => "unhelpful",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRecord {
    pub reviewer_id: String,
    pub reviewer_name: String,
    pub item_id: String,
    pub helpful_votes: u64,
    pub total_votes: u64,
    pub review_text: String,
    pub summary: String,
    pub overall: f64,
    pub unix_time: i64,
    pub category: Category,
}

fn opt_str(obj: &serde_json::Map<String, Value>, key: &str) -> String {
    obj.get(key).and_then(Value::as_str).unwrap_or_default().to_string()
}

/// Parses one JSON-lines review object. `line_no` is 1-based and only used
/// for error messages.
pub fn parse_review_record(line: &str, line_no: usize, category: &Category) -> Result<ReviewRecord> {
    let perr = |message: String| Error::Parse { line: line_no, message };
    let value: Value = serde_json::from_str(line).map_err(|e| perr(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| perr("not a JSON object".into()))?;

    let helpful = obj.get("helpful").ok_or_else(|| Error::MissingField("helpful".into()))?;
    let pair = helpful
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| perr("`helpful` must be a two-element array".into()))?;
    let as_int = |v: &Value| {
        v.as_i64()
            .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
            .ok_or_else(|| perr(format!("vote count `{v}` is not an integer")))
    };
    let (h, t) = (as_int(&pair[0])?, as_int(&pair[1])?);
    if h < 0 || t < 0 || h > t {
        return Err(Error::InvalidVotes { helpful: h, total: t });
    }

    let review_text = obj
        .get("reviewText")
        .ok_or_else(|| Error::MissingField("reviewText".into()))?
        .as_str()
        .ok_or_else(|| perr("`reviewText` is not a string".into()))?
        .to_string();

    let overall = obj
        .get("overall")
        .ok_or_else(|| Error::MissingField("overall".into()))?
        .as_f64()
        .ok_or_else(|| perr("`overall` is not a number".into()))?;
    if !(1.0..=5.0).contains(&overall) || overall.fract() != 0.0 {
        return Err(perr(format!("rating {overall} outside {{1.0, ..., 5.0}}")));
    }

    Ok(ReviewRecord {
        reviewer_id: opt_str(obj, "reviewerID"),
        reviewer_name: opt_str(obj, "reviewerName"),
        item_id: opt_str(obj, "asin"),
        helpful_votes: h as u64,
        total_votes: t as u64,
        review_text,
        summary: opt_str(obj, "summary"),
        overall,
        unix_time: obj.get("unixReviewTime").and_then(Value::as_i64).unwrap_or(0),
        category: category.clone(),
    })
}
