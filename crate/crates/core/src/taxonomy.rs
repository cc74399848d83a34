//! Closed action-class vocabulary and its string codec.
//!
//! The 17 classes follow the SoccerNet-v2 label-file spelling. Judges may
//! additionally answer `out-of-world` for noteworthy moments outside the
//! vocabulary; such verdicts are tracked but never evaluated.

use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the 17 SoccerNet-v2 action classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionClass {
    Penalty,
    KickOff,
    Goal,
    Substitution,
    Offside,
    ShotsOnTarget,
    ShotsOffTarget,
    Clearance,
    BallOutOfPlay,
    ThrowIn,
    Foul,
    IndirectFreeKick,
    DirectFreeKick,
    Corner,
    YellowCard,
    RedCard,
    YellowToRedCard,
}

impl ActionClass {
    /// All classes in canonical order. The order is part of the baseline's
    /// randomness keying and of every report layout.
    pub const ALL: [ActionClass; 17] = [
        ActionClass::Penalty,
        ActionClass::KickOff,
        ActionClass::Goal,
        ActionClass::Substitution,
        ActionClass::Offside,
        ActionClass::ShotsOnTarget,
        ActionClass::ShotsOffTarget,
        ActionClass::Clearance,
        ActionClass::BallOutOfPlay,
        ActionClass::ThrowIn,
        ActionClass::Foul,
        ActionClass::IndirectFreeKick,
        ActionClass::DirectFreeKick,
        ActionClass::Corner,
        ActionClass::YellowCard,
        ActionClass::RedCard,
        ActionClass::YellowToRedCard,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// SoccerNet-v2 spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            ActionClass::Penalty => "Penalty",
            ActionClass::KickOff => "Kick-off",
            ActionClass::Goal => "Goal",
            ActionClass::Substitution => "Substitution",
            ActionClass::Offside => "Offside",
            ActionClass::ShotsOnTarget => "Shots on target",
            ActionClass::ShotsOffTarget => "Shots off target",
            ActionClass::Clearance => "Clearance",
            ActionClass::BallOutOfPlay => "Ball out of play",
            ActionClass::ThrowIn => "Throw-in",
            ActionClass::Foul => "Foul",
            ActionClass::IndirectFreeKick => "Indirect free-kick",
            ActionClass::DirectFreeKick => "Direct free-kick",
            ActionClass::Corner => "Corner",
            ActionClass::YellowCard => "Yellow card",
            ActionClass::RedCard => "Red card",
            ActionClass::YellowToRedCard => "Yellow->red card",
        }
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ActionClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ActionClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match parse_label(&s) {
            Ok(VerdictClass::InTaxonomy(c)) => Ok(c),
            Ok(VerdictClass::OutOfWorld) => Err(serde::de::Error::custom(
                "out-of-world is not an action class",
            )),
            Err(e) => Err(serde::de::Error::custom(e)),
        }
    }
}

/// A judge's class answer: a taxonomy class or the out-of-world label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VerdictClass {
    InTaxonomy(ActionClass),
    OutOfWorld,
}

impl VerdictClass {
    /// The 18 possible values, taxonomy classes first.
    pub fn all() -> impl Iterator<Item = VerdictClass> {
        ActionClass::ALL
            .into_iter()
            .map(VerdictClass::InTaxonomy)
            .chain(std::iter::once(VerdictClass::OutOfWorld))
    }

    pub fn action(self) -> Option<ActionClass> {
        match self {
            VerdictClass::InTaxonomy(c) => Some(c),
            VerdictClass::OutOfWorld => None,
        }
    }
}

impl From<ActionClass> for VerdictClass {
    fn from(c: ActionClass) -> Self {
        VerdictClass::InTaxonomy(c)
    }
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&canonical_label(*self))
    }
}

impl Serialize for VerdictClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&canonical_label(*self))
    }
}

impl<'de> Deserialize<'de> for VerdictClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_label(&s).map_err(serde::de::Error::custom)
    }
}

pub const OUT_OF_WORLD: &str = "out-of-world";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("unrecognized label {0:?}")]
    Unrecognized(String),
    #[error("class map must list 17 or 18 entries, found {0}")]
    WrongEntryCount(usize),
    #[error("label {label:?} is claimed by both {first} and {second}")]
    AliasCollision {
        label: String,
        first: VerdictClass,
        second: VerdictClass,
    },
    #[error("class map entry {0} has an empty canonical form")]
    EmptyCanonical(usize),
    #[error("malformed class map: {0}")]
    Malformed(String),
}

/// Lowercase, fold every non-alphanumeric run (punctuation, arrows, dashes)
/// into a single space, and trim.
pub fn normalize_label(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

fn default_aliases(c: VerdictClass) -> &'static [&'static str] {
    use ActionClass::*;
    match c {
        VerdictClass::OutOfWorld => &["out of world", "outofworld", "off taxonomy"],
        VerdictClass::InTaxonomy(a) => match a {
            Penalty => &["penalty kick", "penalties"],
            KickOff => &["kickoff", "kick offs"],
            Goal => &["goals"],
            Substitution => &["substitutions"],
            Offside => &["off side", "offsides"],
            ShotsOnTarget => &["shot on target"],
            ShotsOffTarget => &["shot off target"],
            Clearance => &["clearances"],
            BallOutOfPlay => &["ball out", "out of play"],
            ThrowIn => &["throwin", "throw ins"],
            Foul => &["fouls"],
            IndirectFreeKick => &["indirect free kicks", "indirect freekick"],
            DirectFreeKick => &["direct free kicks", "direct freekick"],
            Corner => &["corners", "corner kick"],
            YellowCard => &["yellow cards", "yellow"],
            RedCard => &["red cards", "red", "straight red"],
            YellowToRedCard => &["yellow to red card", "second yellow", "second yellow card"],
        },
    }
}

/// A label codec: canonical strings plus a normalized alias index.
#[derive(Debug, Clone)]
pub struct LabelTable {
    canonical: HashMap<VerdictClass, String>,
    index: HashMap<String, VerdictClass>,
}

/// One entry of a class-map override file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMapEntry {
    pub canonical: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl LabelTable {
    fn build<'a>(
        entries: impl IntoIterator<Item = (VerdictClass, String, Vec<&'a str>)>,
    ) -> Result<Self, TaxonomyError> {
        let mut canonical = HashMap::new();
        let mut index: HashMap<String, VerdictClass> = HashMap::new();
        for (class, canon, aliases) in entries {
            for label in std::iter::once(canon.as_str()).chain(aliases) {
                let key = normalize_label(label);
                if key.is_empty() {
                    continue;
                }
                match index.get(&key) {
                    Some(&other) if other != class => {
                        return Err(TaxonomyError::AliasCollision {
                            label: label.to_string(),
                            first: other,
                            second: class,
                        })
                    }
                    _ => {
                        index.insert(key, class);
                    }
                }
            }
            canonical.insert(class, canon);
        }
        Ok(Self { canonical, index })
    }

    /// Built-in SoccerNet-v2 table.
    pub fn soccernet_v2() -> Self {
        Self::build(VerdictClass::all().map(|c| {
            let canon = match c {
                VerdictClass::InTaxonomy(a) => a.as_str().to_string(),
                VerdictClass::OutOfWorld => OUT_OF_WORLD.to_string(),
            };
            (c, canon, default_aliases(c).to_vec())
        }))
        .expect("built-in label table is collision free")
    }

    /// Build a table from a class-map override. Entries are positional: the
    /// first 17 map onto [`ActionClass::ALL`] in order, an optional 18th entry
    /// replaces the out-of-world label set.
    pub fn from_class_map(entries: &[ClassMapEntry]) -> Result<Self, TaxonomyError> {
        if entries.len() != 17 && entries.len() != 18 {
            return Err(TaxonomyError::WrongEntryCount(entries.len()));
        }
        if let Some(i) = entries
            .iter()
            .position(|e| normalize_label(&e.canonical).is_empty())
        {
            return Err(TaxonomyError::EmptyCanonical(i));
        }
        let out_of_world = match entries.get(17) {
            Some(e) => (
                VerdictClass::OutOfWorld,
                e.canonical.clone(),
                e.aliases.iter().map(String::as_str).collect(),
            ),
            None => (
                VerdictClass::OutOfWorld,
                OUT_OF_WORLD.to_string(),
                default_aliases(VerdictClass::OutOfWorld).to_vec(),
            ),
        };
        Self::build(
            ActionClass::ALL
                .into_iter()
                .zip(entries)
                .map(|(c, e)| {
                    (
                        VerdictClass::InTaxonomy(c),
                        e.canonical.clone(),
                        e.aliases.iter().map(String::as_str).collect(),
                    )
                })
                .chain(std::iter::once(out_of_world)),
        )
    }

    pub fn from_class_map_json(bytes: &[u8]) -> Result<Self, TaxonomyError> {
        let entries: Vec<ClassMapEntry> =
            serde_json::from_slice(bytes).map_err(|e| TaxonomyError::Malformed(e.to_string()))?;
        Self::from_class_map(&entries)
    }

    pub fn parse(&self, s: &str) -> Result<VerdictClass, TaxonomyError> {
        self.index
            .get(&normalize_label(s))
            .copied()
            .ok_or_else(|| TaxonomyError::Unrecognized(s.to_string()))
    }

    pub fn canonical(&self, c: VerdictClass) -> &str {
        &self.canonical[&c]
    }

    /// Every normalized key the table recognizes, with its class.
    pub fn keys(&self) -> impl Iterator<Item = (&str, VerdictClass)> {
        self.index.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl Default for LabelTable {
    fn default() -> Self {
        DEFAULT_TABLE.clone()
    }
}

static DEFAULT_TABLE: LazyLock<LabelTable> = LazyLock::new(LabelTable::soccernet_v2);

/// The built-in table, shared.
pub fn default_table() -> &'static LabelTable {
    &DEFAULT_TABLE
}

/// Parse a class label with the built-in table. Garbage is an error, never
/// out-of-world.
pub fn parse_label(s: &str) -> Result<VerdictClass, TaxonomyError> {
    DEFAULT_TABLE.parse(s)
}

pub fn canonical_label(c: VerdictClass) -> String {
    DEFAULT_TABLE.canonical(c).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_canonical_forms() {
        assert_eq!(parse_label("Goal"), Ok(ActionClass::Goal.into()));
        assert_eq!(parse_label("out-of-world"), Ok(VerdictClass::OutOfWorld));
        assert_eq!(
            canonical_label(ActionClass::YellowToRedCard.into()),
            "Yellow->red card"
        );
        assert_eq!(canonical_label(VerdictClass::OutOfWorld), "out-of-world");
    }

    #[test]
    fn normalization_and_aliases() {
        assert_eq!(
            parse_label("yellow  CARD"),
            Ok(ActionClass::YellowCard.into())
        );
        assert_eq!(
            parse_label("yellow→red card"),
            Ok(ActionClass::YellowToRedCard.into())
        );
        assert_eq!(
            parse_label("shot on target"),
            Ok(ActionClass::ShotsOnTarget.into())
        );
        assert_eq!(parse_label(" Kick off. "), Ok(ActionClass::KickOff.into()));
        assert_eq!(parse_label("THROW-IN"), Ok(ActionClass::ThrowIn.into()));
    }

    #[test]
    fn garbage_is_not_out_of_world() {
        assert_eq!(
            parse_label("a spectacular bicycle kick"),
            Err(TaxonomyError::Unrecognized(
                "a spectacular bicycle kick".into()
            ))
        );
        assert!(parse_label("").is_err());
    }

    #[test]
    fn every_value_round_trips() {
        let all: Vec<_> = VerdictClass::all().collect();
        assert_eq!(all.len(), 18);
        for c in all {
            assert_eq!(parse_label(&canonical_label(c)), Ok(c));
        }
    }

    #[test]
    fn canonical_forms_are_distinct_under_normalization() {
        let mut seen = std::collections::HashSet::new();
        for c in VerdictClass::all() {
            assert!(seen.insert(normalize_label(&canonical_label(c))), "{c}");
        }
        // Every alias key resolves to exactly one class.
        let table = default_table();
        for (key, class) in table.keys() {
            assert_eq!(table.parse(key), Ok(class));
        }
    }

    #[test]
    fn class_map_override() {
        let mut entries: Vec<ClassMapEntry> = ActionClass::ALL
            .iter()
            .map(|c| ClassMapEntry {
                canonical: c.as_str().to_string(),
                aliases: vec![],
            })
            .collect();
        entries[2].aliases.push("GOOOAL".into());
        let table = LabelTable::from_class_map(&entries).unwrap();
        assert_eq!(table.parse("gooOAL"), Ok(ActionClass::Goal.into()));
        assert_eq!(table.parse("out of world"), Ok(VerdictClass::OutOfWorld));

        entries[3].aliases.push("goal".into());
        assert!(matches!(
            LabelTable::from_class_map(&entries),
            Err(TaxonomyError::AliasCollision { .. })
        ));
        assert_eq!(
            LabelTable::from_class_map(&entries[..5]).unwrap_err(),
            TaxonomyError::WrongEntryCount(5)
        );
    }

    #[test]
    fn serde_uses_canonical_strings() {
        let s = serde_json::to_string(&ActionClass::ShotsOffTarget).unwrap();
        assert_eq!(s, "\"Shots off target\"");
        let c: ActionClass = serde_json::from_str("\"yellow->red card\"").unwrap();
        assert_eq!(c, ActionClass::YellowToRedCard);
        assert!(serde_json::from_str::<ActionClass>("\"out-of-world\"").is_err());
    }
}
