//! The closed ontology of personal-knowledge relations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eleven relations a knowledge triple can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Relation {
    Name,
    Gender,
    Profession,
    Status,
    Follows,
    IsFriendOf,
    LivesNear,
    TravelsTo,
    Purchases,
    WantsToBuy,
    VisitsMerchant,
}

/// Coarse grouping of relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationCategory {
    UserProfile,
    Social,
    Location,
    Shopping,
}

impl Relation {
    pub const ALL: [Relation; 11] = [
        Relation::Name,
        Relation::Gender,
        Relation::Profession,
        Relation::Status,
        Relation::Follows,
        Relation::IsFriendOf,
        Relation::LivesNear,
        Relation::TravelsTo,
        Relation::Purchases,
        Relation::WantsToBuy,
        Relation::VisitsMerchant,
    ];

    pub fn category(self) -> RelationCategory {
        match self {
            Relation::Name | Relation::Gender | Relation::Profession | Relation::Status => {
                RelationCategory::UserProfile
            }
            Relation::Follows | Relation::IsFriendOf => RelationCategory::Social,
            Relation::LivesNear | Relation::TravelsTo => RelationCategory::Location,
            Relation::Purchases | Relation::WantsToBuy | Relation::VisitsMerchant => {
                RelationCategory::Shopping
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Name => "name",
            Relation::Gender => "gender",
            Relation::Profession => "profession",
            Relation::Status => "status",
            Relation::Follows => "follows",
            Relation::IsFriendOf => "isFriendOf",
            Relation::LivesNear => "livesNear",
            Relation::TravelsTo => "travelsTo",
            Relation::Purchases => "purchases",
            Relation::WantsToBuy => "wantsToBuy",
            Relation::VisitsMerchant => "visitsMerchant",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_eleven_round_trip_through_text() {
        assert_eq!(Relation::ALL.len(), 11);
        for r in Relation::ALL {
            assert_eq!(r.as_str().parse::<Relation>().unwrap(), r);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(json, format!("\"{}\"", r.as_str()));
            assert_eq!(serde_json::from_str::<Relation>(&json).unwrap(), r);
        }
    }

    #[test]
    fn categories() {
        assert_eq!(Relation::Name.category(), RelationCategory::UserProfile);
        assert_eq!(Relation::Follows.category(), RelationCategory::Social);
        assert_eq!(Relation::TravelsTo.category(), RelationCategory::Location);
        assert_eq!(
            Relation::VisitsMerchant.category(),
            RelationCategory::Shopping
        );
    }
}
