//! Restaurant knowledgebase: nine attributes per place, loaded once and then
//! shared read-only.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::terms::{fold_text, normalize_value, Value};

/// The nine place properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Name,
    FoodType,
    Establishment,
    PriceRange,
    CustomerRating,
    Address,
    PhoneNumber,
    FamilyFriendly,
    Distance,
}

impl Attribute {
    pub const ALL: [Attribute; 9] = [
        Attribute::Name,
        Attribute::FoodType,
        Attribute::Establishment,
        Attribute::PriceRange,
        Attribute::CustomerRating,
        Attribute::Address,
        Attribute::PhoneNumber,
        Attribute::FamilyFriendly,
        Attribute::Distance,
    ];

    /// Canonical name, as used in requirement listings.
    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Name => "name",
            Attribute::FoodType => "food type",
            Attribute::Establishment => "establishment",
            Attribute::PriceRange => "price range",
            Attribute::CustomerRating => "customer rating",
            Attribute::Address => "address",
            Attribute::PhoneNumber => "phone number",
            Attribute::FamilyFriendly => "family friendly",
            Attribute::Distance => "distance",
        }
    }

    /// Predicate name emitted by the semantic parser.
    pub fn parser_name(self) -> &'static str {
        match self {
            Attribute::Name => "restaurant-name",
            Attribute::FamilyFriendly => "family-friendly",
            other => other.as_str(),
        }
    }

    /// Closed value domain, for the attributes that have one.
    pub fn finite_domain(self) -> Option<&'static [&'static str]> {
        match self {
            Attribute::PriceRange => Some(&["cheap", "moderate", "expensive"]),
            Attribute::CustomerRating => Some(&["low", "average", "high"]),
            Attribute::FamilyFriendly => Some(&["yes", "no"]),
            _ => None,
        }
    }

    /// Accepts the canonical names plus the spellings parsers tend to use
    /// (`restaurant-name`, `family_friendly`, `cuisine`, `phone`, ...).
    pub fn lookup(raw: &str) -> Option<Attribute> {
        let key = fold_text(&raw.replace(['_', '-'], " "));
        let attr = match key.as_str() {
            "name" | "restaurant name" | "place name" => Attribute::Name,
            "food type" | "food" | "foodtype" | "cuisine" | "food types" => Attribute::FoodType,
            "establishment" | "establishment type" | "eattype" | "eat type" | "venue" => {
                Attribute::Establishment
            }
            "price range" | "price" | "pricerange" | "budget" => Attribute::PriceRange,
            "customer rating" | "rating" | "customerrating" | "customer ratings" => {
                Attribute::CustomerRating
            }
            "address" | "location" => Attribute::Address,
            "phone number" | "phone" | "phone numbers" | "contact number" | "telephone" => {
                Attribute::PhoneNumber
            }
            "family friendly" | "familyfriendly" | "family friendliness" => {
                Attribute::FamilyFriendly
            }
            "distance" => Attribute::Distance,
            _ => return None,
        };
        Some(attr)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::lookup(s).ok_or_else(|| KbError::UnknownAttribute(s.to_string()))
    }
}

impl Serialize for Attribute {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Attribute {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Attribute::lookup(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown attribute `{raw}`")))
    }
}

macro_rules! closed_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match fold_text(s).as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "`{}` is not a valid {} (expected one of: {})",
                        other,
                        stringify!($name),
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

closed_enum!(PriceRange { Cheap => "cheap", Moderate => "moderate", Expensive => "expensive" });
closed_enum!(Rating { Low => "low", Average => "average", High => "high" });
closed_enum!(YesNo { Yes => "yes", No => "no" });

/// One restaurant record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    #[serde(default)]
    pub id: Option<u32>,
    pub name: String,
    #[serde(rename = "food type")]
    pub food_type: String,
    pub establishment: String,
    #[serde(rename = "price range")]
    pub price_range: PriceRange,
    #[serde(rename = "customer rating")]
    pub customer_rating: Rating,
    pub address: String,
    #[serde(rename = "phone number", alias = "phone")]
    pub phone: String,
    #[serde(rename = "family friendly", alias = "family-friendly")]
    pub family_friendly: YesNo,
    pub distance: f64,
    /// Attributes whose values are placeholders rather than real data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synthetic: Vec<String>,
}

impl Place {
    /// Position-assigned or explicit id. Always set after loading.
    pub fn id(&self) -> u32 {
        self.id.unwrap_or_default()
    }

    /// The stored text, as written in the source file.
    pub fn display(&self, attribute: Attribute) -> String {
        match attribute {
            Attribute::Name => self.name.clone(),
            Attribute::FoodType => self.food_type.clone(),
            Attribute::Establishment => self.establishment.clone(),
            Attribute::PriceRange => self.price_range.as_str().to_string(),
            Attribute::CustomerRating => self.customer_rating.as_str().to_string(),
            Attribute::Address => self.address.clone(),
            Attribute::PhoneNumber => self.phone.clone(),
            Attribute::FamilyFriendly => self.family_friendly.as_str().to_string(),
            Attribute::Distance => format_distance(self.distance),
        }
    }
}

fn format_distance(d: f64) -> String {
    format!("{d}")
}

/// The normalized value of `attribute` at `place`.
pub fn attribute_of(place: &Place, attribute: Attribute) -> Value {
    Value::Concrete(fold_text(&place.display(attribute)))
}

/// [`attribute_of`] keyed by attribute name.
pub fn attribute_of_named(place: &Place, attribute: &str) -> Result<Value, KbError> {
    Ok(attribute_of(place, attribute.parse()?))
}

/// Normalizes a raw value for a known attribute. Beyond
/// [`normalize_value`], this folds price synonyms so that "average",
/// "medium" and friends mean `moderate`, and "low"/"high" on a price mean
/// `cheap`/`expensive`.
pub fn normalize_attribute_value(attribute: Attribute, raw: &str) -> Value {
    let value = normalize_value(raw);
    let Value::Concrete(text) = &value else {
        return value;
    };
    let mapped = match (attribute, text.as_str()) {
        (Attribute::PriceRange, "average" | "medium" | "mid" | "mid-range" | "reasonable") => {
            "moderate"
        }
        (Attribute::PriceRange, "low" | "inexpensive" | "affordable" | "budget") => "cheap",
        (Attribute::PriceRange, "high" | "pricey" | "upscale" | "high-end") => "expensive",
        (Attribute::CustomerRating, "good" | "great" | "excellent") => "high",
        (Attribute::CustomerRating, "bad" | "poor") => "low",
        (Attribute::CustomerRating, "medium" | "ok" | "okay") => "average",
        (Attribute::FamilyFriendly, "true" | "y") => "yes",
        (Attribute::FamilyFriendly, "false" | "n") => "no",
        _ => return value,
    };
    Value::concrete(mapped)
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read knowledgebase: {0}")]
    Io(#[from] std::io::Error),
    #[error("knowledgebase format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate place id {0}")]
    DuplicateId(u32),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
}

/// Ordered, immutable collection of places.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Knowledgebase {
    places: Vec<Place>,
}

impl Knowledgebase {
    /// Validates ids (assigning positional ids where absent) and freezes the
    /// collection.
    pub fn from_places(mut places: Vec<Place>) -> Result<Self, KbError> {
        let mut seen = std::collections::HashSet::new();
        for (i, place) in places.iter_mut().enumerate() {
            let id = *place.id.get_or_insert(i as u32);
            if !seen.insert(id) {
                return Err(KbError::DuplicateId(id));
            }
        }
        Ok(Knowledgebase { places })
    }

    /// JSON array of place objects.
    pub fn from_json_str(text: &str) -> Result<Self, KbError> {
        if text.trim().is_empty() {
            return Ok(Knowledgebase::default());
        }
        let places: Vec<Place> = serde_json::from_str(text).map_err(|e| KbError::Format {
            line: e.line(),
            message: e.to_string(),
        })?;
        Knowledgebase::from_places(places)
    }

    /// CSV with a header row naming the nine attributes (plus optional `id`).
    pub fn from_csv_reader(reader: impl Read) -> Result<Self, KbError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut places = Vec::new();
        for record in rdr.deserialize::<Place>() {
            let place = record.map_err(|e| KbError::Format {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            places.push(place);
        }
        Knowledgebase::from_places(places)
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Place> {
        self.places.iter().find(|p| p.id() == id)
    }

    pub fn find_by_name(&self, name: &str) -> Option<&Place> {
        let key = fold_text(name);
        self.places.iter().find(|p| fold_text(&p.name) == key)
    }

    /// Distinct normalized values per attribute, in first-seen order, plus
    /// the closed domains.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut values: BTreeMap<Attribute, Vec<String>> = BTreeMap::new();
        for attr in Attribute::ALL {
            let entry = values.entry(attr).or_default();
            if let Some(domain) = attr.finite_domain() {
                entry.extend(domain.iter().map(|s| s.to_string()));
            }
        }
        for place in &self.places {
            for attr in Attribute::ALL {
                let text = fold_text(&place.display(attr));
                let entry = values.entry(attr).or_default();
                if !entry.contains(&text) {
                    entry.push(text);
                }
            }
        }
        Vocabulary { values }
    }
}

/// Loads a knowledgebase, choosing the format by extension (`.csv`) or, for
/// anything else, JSON.
pub fn load_kb(path: impl AsRef<Path>) -> Result<Knowledgebase, KbError> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        Knowledgebase::from_csv_reader(fs::File::open(path)?)
    } else {
        Knowledgebase::from_json_str(&fs::read_to_string(path)?)
    }
}

/// The six-place knowledgebase bundled with the crate.
pub fn fixture_kb() -> Knowledgebase {
    Knowledgebase::from_json_str(FIXTURE_KB_JSON).expect("bundled fixture is valid")
}

pub const FIXTURE_KB_JSON: &str = include_str!("../data/fixture_kb.json");

/// Known attribute values, used to map bare words to attributes.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    values: BTreeMap<Attribute, Vec<String>>,
}

impl Vocabulary {
    pub fn values(&self, attribute: Attribute) -> &[String] {
        self.values.get(&attribute).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, attribute: Attribute, value: &str) -> bool {
        self.values(attribute).iter().any(|v| v == value)
    }

    /// Adds extra values (e.g. common cuisines absent from the KB).
    pub fn extend(&mut self, attribute: Attribute, extra: impl IntoIterator<Item = String>) {
        let entry = self.values.entry(attribute).or_default();
        for v in extra {
            let v = fold_text(&v);
            if !entry.contains(&v) {
                entry.push(v);
            }
        }
    }

    /// The single categorical attribute that lists `value`, if any. Free-text
    /// attributes (name, address, phone, distance) are not consulted.
    pub fn attribute_for(&self, value: &str) -> Option<Attribute> {
        const CATEGORICAL: [Attribute; 5] = [
            Attribute::FoodType,
            Attribute::Establishment,
            Attribute::PriceRange,
            Attribute::CustomerRating,
            Attribute::FamilyFriendly,
        ];
        let mut hits = CATEGORICAL
            .into_iter()
            .filter(|a| self.contains(*a, value));
        let first = hits.next()?;
        match hits.next() {
            None => Some(first),
            Some(_) => None,
        }
    }
}
