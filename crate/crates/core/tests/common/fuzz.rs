//! Token shapes for request fuzzing at the enforcement point.

use proptest::prelude::*;

use smsc::policy::Token;

use super::gen::{pair, pid};

#[derive(Debug, Clone)]
pub enum TokenShape {
    Valid,
    Expired,
    ForeignIssuer,
    Tampered,
}

impl TokenShape {
    pub fn is_valid(&self) -> bool {
        matches!(self, TokenShape::Valid)
    }
}

pub fn arb_token(roles: Vec<&'static str>) -> impl Strategy<Value = (String, TokenShape)> {
    (
        prop::sample::select(roles),
        prop_oneof![
            4 => Just(TokenShape::Valid),
            1 => Just(TokenShape::Expired),
            1 => Just(TokenShape::ForeignIssuer),
            1 => Just(TokenShape::Tampered),
        ],
    )
        .prop_map(|(r, s)| (r.to_string(), s))
}

/// A token for `role` issued by `sts`, spoiled according to `shape`.
pub fn token(role: &str, shape: &TokenShape, now: u64) -> Token {
    let claims = [pair("role", role)].into();
    match shape {
        TokenShape::Valid => Token::issue(pid("caller"), claims, "sts", now + 5),
        TokenShape::Expired => Token::issue(pid("caller"), claims, "sts", now.saturating_sub(1)),
        TokenShape::ForeignIssuer => Token::issue(pid("caller"), claims, "rogue", now + 5),
        TokenShape::Tampered => {
            let mut t = Token::issue(pid("caller"), claims, "sts", now + 5);
            t.expiry_tick += 100;
            t
        }
    }
}
