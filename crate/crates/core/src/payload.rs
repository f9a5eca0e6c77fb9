//! The serialization envelope shared by every contract.
//!
//! Contract states, setups and messages are all encoded as a [`Payload`]
//! tree so heterogeneous contracts can live in one [`ChainState`].
//!
//! Canonical text grammar (whitespace between tokens is ignored):
//!
//! ```text
//! payload := "unit" | "true" | "false"
//!          | DIGITS                       Nat
//!          | ("+" | "-") DIGITS           Int
//!          | "@u" DIGITS | "@c" DIGITS    Addr  (@c0 is the null address)
//!          | "(" payload "," payload ")"   Pair
//!          | "[" [payload {";" payload}] "]"                 List
//!          | "{" [payload "=>" payload {";" payload "=>" payload}] "}"  MapKV
//!          | IDENT "(" payload ")"        Tag
//! ```
//!
//! Records are lists of single-field tags in declaration order, e.g.
//! `[to(@u2); minTokensBought(90); deadline(5)]`. The renderer always emits
//! the canonical form; map keys are sorted and unique.
//!
//! [`ChainState`]: crate::chain::ChainState

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;

use crate::primitives::{Address, Int, Nat, Tez};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Payload {
    Unit,
    Nat(Nat),
    Int(Int),
    Bool(bool),
    Addr(Address),
    Pair(Box<Payload>, Box<Payload>),
    List(Vec<Payload>),
    /// Sorted by key, no duplicate keys. Build with [`Payload::map`].
    MapKV(Vec<(Payload, Payload)>),
    Tag(String, Box<Payload>),
}

impl Payload {
    pub fn tag(name: impl Into<String>, arg: Payload) -> Payload {
        Payload::Tag(name.into(), Box::new(arg))
    }

    pub fn pair(a: Payload, b: Payload) -> Payload {
        Payload::Pair(Box::new(a), Box::new(b))
    }

    pub fn nat(v: impl Into<Nat>) -> Payload {
        Payload::Nat(v.into())
    }

    /// Builds a canonical map; later duplicates overwrite earlier ones.
    pub fn map(entries: impl IntoIterator<Item = (Payload, Payload)>) -> Payload {
        let sorted: BTreeMap<Payload, Payload> = entries.into_iter().collect();
        Payload::MapKV(sorted.into_iter().collect())
    }

    pub fn record<'a>(fields: impl IntoIterator<Item = (&'a str, Payload)>) -> Payload {
        Payload::List(
            fields
                .into_iter()
                .map(|(name, value)| Payload::tag(name, value))
                .collect(),
        )
    }

    pub fn as_tag(&self) -> Option<(&str, &Payload)> {
        match self {
            Payload::Tag(name, arg) => Some((name.as_str(), arg)),
            _ => None,
        }
    }

    pub fn is_canonical(&self) -> bool {
        match self {
            Payload::Pair(a, b) => a.is_canonical() && b.is_canonical(),
            Payload::List(items) => items.iter().all(Payload::is_canonical),
            Payload::MapKV(entries) => {
                entries.windows(2).all(|w| w[0].0 < w[1].0)
                    && entries
                        .iter()
                        .all(|(k, v)| k.is_canonical() && v.is_canonical())
            }
            Payload::Tag(name, arg) => is_ident(name) && arg.is_canonical(),
            _ => true,
        }
    }

    pub fn parse(text: &str) -> Result<Payload, ParseError> {
        Self::parse_with(text, &|_: &str| None)
    }

    /// Parses text in which `@name` may refer to an alias known to `resolve`.
    pub fn parse_with(
        text: &str,
        resolve: &dyn Fn(&str) -> Option<Address>,
    ) -> Result<Payload, ParseError> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            resolve,
        };
        let value = p.payload()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(value)
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Unit => f.write_str("unit"),
            Payload::Nat(n) => write!(f, "{n}"),
            Payload::Int(i) => {
                if i.is_negative() {
                    write!(f, "{i}")
                } else {
                    write!(f, "+{i}")
                }
            }
            Payload::Bool(b) => write!(f, "{b}"),
            Payload::Addr(a) => write!(f, "{a}"),
            Payload::Pair(a, b) => write!(f, "({a}, {b})"),
            Payload::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            Payload::MapKV(entries) => {
                f.write_str("{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{k} => {v}")?;
                }
                f.write_str("}")
            }
            Payload::Tag(name, arg) => write!(f, "{name}({arg})"),
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "unit" | "true" | "false")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("payload parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<Address>,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && pred(self.src[self.pos]) {
            self.pos += 1;
        }
        // Only ASCII bytes satisfy the predicates used below.
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn digits(&mut self) -> Result<Nat, ParseError> {
        let text = self.take_while(|b| b.is_ascii_digit()).to_string();
        if text.is_empty() {
            return Err(self.error("expected digits"));
        }
        text.parse().map_err(|_| self.error("bad number"))
    }

    fn payload(&mut self) -> Result<Payload, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'0'..=b'9') => Ok(Payload::Nat(self.digits()?)),
            Some(c @ (b'+' | b'-')) => {
                self.pos += 1;
                let magnitude = Int::from(self.digits()?);
                Ok(Payload::Int(if c == b'-' { -magnitude } else { magnitude }))
            }
            Some(b'@') => {
                self.pos += 1;
                let name = self
                    .take_while(|b| b.is_ascii_alphanumeric() || b == b'_')
                    .to_string();
                if let Ok(addr) = format!("@{name}").parse::<Address>() {
                    return Ok(Payload::Addr(addr));
                }
                (self.resolve)(&name)
                    .map(Payload::Addr)
                    .ok_or_else(|| self.error(format!("unknown address alias `@{name}`")))
            }
            Some(b'(') => {
                self.pos += 1;
                let a = self.payload()?;
                self.expect(",")?;
                let b = self.payload()?;
                self.expect(")")?;
                Ok(Payload::pair(a, b))
            }
            Some(b'[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.eat("]") {
                    loop {
                        items.push(self.payload()?);
                        if self.eat("]") {
                            break;
                        }
                        self.expect(";")?;
                    }
                }
                Ok(Payload::List(items))
            }
            Some(b'{') => {
                self.pos += 1;
                let mut entries = BTreeMap::new();
                if !self.eat("}") {
                    loop {
                        let k = self.payload()?;
                        self.expect("=>")?;
                        let v = self.payload()?;
                        if entries.insert(k, v).is_some() {
                            return Err(self.error("duplicate map key"));
                        }
                        if self.eat("}") {
                            break;
                        }
                        self.expect(";")?;
                    }
                }
                Ok(Payload::MapKV(entries.into_iter().collect()))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let word = self
                    .take_while(|b| b.is_ascii_alphanumeric() || b == b'_')
                    .to_string();
                match word.as_str() {
                    "unit" => Ok(Payload::Unit),
                    "true" => Ok(Payload::Bool(true)),
                    "false" => Ok(Payload::Bool(false)),
                    _ => {
                        self.expect("(")?;
                        let arg = self.payload()?;
                        self.expect(")")?;
                        Ok(Payload::tag(word, arg))
                    }
                }
            }
            Some(c) => Err(self.error(format!("unexpected character `{}`", c as char))),
        }
    }
}

/// Conversion between a typed value and its canonical payload.
pub trait Codec: Sized {
    fn encode(&self) -> Payload;
    /// `None` when the payload does not have this type's shape.
    fn decode(p: &Payload) -> Option<Self>;
}

impl Codec for Payload {
    fn encode(&self) -> Payload {
        self.clone()
    }
    fn decode(p: &Payload) -> Option<Self> {
        Some(p.clone())
    }
}

impl Codec for () {
    fn encode(&self) -> Payload {
        Payload::Unit
    }
    fn decode(p: &Payload) -> Option<Self> {
        matches!(p, Payload::Unit).then_some(())
    }
}

impl Codec for Nat {
    fn encode(&self) -> Payload {
        Payload::Nat(self.clone())
    }
    fn decode(p: &Payload) -> Option<Self> {
        match p {
            Payload::Nat(n) => Some(n.clone()),
            _ => None,
        }
    }
}

impl Codec for Int {
    fn encode(&self) -> Payload {
        Payload::Int(self.clone())
    }
    fn decode(p: &Payload) -> Option<Self> {
        match p {
            Payload::Int(i) => Some(i.clone()),
            _ => None,
        }
    }
}

impl Codec for Tez {
    fn encode(&self) -> Payload {
        Payload::Nat(self.0.clone())
    }
    fn decode(p: &Payload) -> Option<Self> {
        Nat::decode(p).map(Tez)
    }
}

impl Codec for bool {
    fn encode(&self) -> Payload {
        Payload::Bool(*self)
    }
    fn decode(p: &Payload) -> Option<Self> {
        match p {
            Payload::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl Codec for Address {
    fn encode(&self) -> Payload {
        Payload::Addr(*self)
    }
    fn decode(p: &Payload) -> Option<Self> {
        match p {
            Payload::Addr(a) => Some(*a),
            _ => None,
        }
    }
}

impl<A: Codec, B: Codec> Codec for (A, B) {
    fn encode(&self) -> Payload {
        Payload::pair(self.0.encode(), self.1.encode())
    }
    fn decode(p: &Payload) -> Option<Self> {
        match p {
            Payload::Pair(a, b) => Some((A::decode(a)?, B::decode(b)?)),
            _ => None,
        }
    }
}

impl<T: Codec> Codec for Vec<T> {
    fn encode(&self) -> Payload {
        Payload::List(self.iter().map(Codec::encode).collect())
    }
    fn decode(p: &Payload) -> Option<Self> {
        match p {
            Payload::List(items) => items.iter().map(T::decode).collect(),
            _ => None,
        }
    }
}

/// Maps encode in key order; decoding rejects non-canonical maps.
impl<K: Codec + Ord, V: Codec> Codec for BTreeMap<K, V> {
    fn encode(&self) -> Payload {
        Payload::map(self.iter().map(|(k, v)| (k.encode(), v.encode())))
    }
    fn decode(p: &Payload) -> Option<Self> {
        match p {
            Payload::MapKV(entries) if entries.windows(2).all(|w| w[0].0 < w[1].0) => entries
                .iter()
                .map(|(k, v)| Some((K::decode(k)?, V::decode(v)?)))
                .collect(),
            _ => None,
        }
    }
}

/// Sequential reader over an encoded record.
pub struct RecordReader<'a> {
    fields: std::slice::Iter<'a, Payload>,
}

impl<'a> RecordReader<'a> {
    pub fn new(p: &'a Payload) -> Option<Self> {
        match p {
            Payload::List(items) => Some(RecordReader {
                fields: items.iter(),
            }),
            _ => None,
        }
    }

    pub fn field<T: Codec>(&mut self, name: &str) -> Option<T> {
        match self.fields.next()? {
            Payload::Tag(n, v) if n == name => T::decode(v),
            _ => None,
        }
    }

    /// Succeeds only if every field was consumed.
    pub fn finish<T>(mut self, value: T) -> Option<T> {
        self.fields.next().is_none().then_some(value)
    }
}

/// Envelope tag under which a contract's own messages travel when the
/// contract also accepts token callbacks.
pub const OTHER_MSG: &str = "other_msg";

pub fn wrap_receiver(inner: Payload) -> Payload {
    Payload::tag(OTHER_MSG, inner)
}

pub fn unwrap_receiver(p: &Payload) -> Option<&Payload> {
    match p.as_tag() {
        Some((OTHER_MSG, inner)) => Some(inner),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renders_canonical_text() {
        let p = Payload::tag(
            "xtz_to_token",
            Payload::record([
                ("to", Payload::Addr(Address::user(2))),
                ("minTokensBought", Payload::nat(90u32)),
                ("deadline", Payload::nat(5u32)),
            ]),
        );
        assert_eq!(
            p.to_string(),
            "xtz_to_token([to(@u2); minTokensBought(90); deadline(5)])"
        );
        assert_eq!(Payload::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn parses_every_variant() {
        let text = "(unit, [true; false; 0; +0; -12; @c0; {1 => 2; 0 => x(unit)}])";
        let p = Payload::parse(text).unwrap();
        assert!(p.is_canonical());
        assert_eq!(
            p.to_string(),
            "(unit, [true; false; 0; +0; -12; @c0; {0 => x(unit); 1 => 2}])"
        );
    }

    #[test]
    fn parse_errors() {
        assert!(Payload::parse("").is_err());
        assert!(Payload::parse("(1 2)").is_err());
        assert!(Payload::parse("{1 => 2; 1 => 3}").is_err());
        assert!(Payload::parse("@alice").is_err());
        assert!(Payload::parse("foo").is_err());
        assert!(Payload::parse("1 2").is_err());
    }

    #[test]
    fn aliases_resolve() {
        let p = Payload::parse_with("to(@alice)", &|n| (n == "alice").then(|| Address::user(1)))
            .unwrap();
        assert_eq!(p, Payload::tag("to", Payload::Addr(Address::user(1))));
    }

    #[test]
    fn nat_round_trip() {
        let zero = Nat::from(0u32);
        assert_eq!(zero.encode(), Payload::nat(0u32));
        assert_eq!(Nat::decode(&zero.encode()), Some(zero));
        assert_eq!(Nat::decode(&Payload::Int(Int::from(0))), None);
    }

    #[test]
    fn wrap_and_unwrap() {
        let inner = Payload::tag("default", Payload::Unit);
        let wrapped = wrap_receiver(inner.clone());
        assert_eq!(wrapped.to_string(), "other_msg(default(unit))");
        assert_eq!(unwrap_receiver(&wrapped), Some(&inner));
        let callback = Payload::tag("receive_total_supply", Payload::nat(100u32));
        assert_eq!(unwrap_receiver(&callback), None);
    }

    #[test]
    fn non_canonical_map_rejected_by_decode() {
        let bad = Payload::MapKV(vec![
            (Payload::nat(2u32), Payload::Unit),
            (Payload::nat(1u32), Payload::Unit),
        ]);
        assert!(!bad.is_canonical());
        assert_eq!(BTreeMap::<Nat, ()>::decode(&bad), None);
    }

    pub(crate) fn arb_payload() -> impl Strategy<Value = Payload> {
        let leaf = prop_oneof![
            Just(Payload::Unit),
            any::<u64>().prop_map(Payload::nat),
            any::<i64>().prop_map(|i| Payload::Int(Int::from(i))),
            any::<bool>().prop_map(Payload::Bool),
            (any::<bool>(), 0u64..50).prop_map(|(u, i)| Payload::Addr(if u {
                Address::user(i)
            } else {
                Address::contract(i)
            })),
        ];
        leaf.prop_recursive(4, 32, 4, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Payload::pair(a, b)),
                prop::collection::vec(inner.clone(), 0..4).prop_map(Payload::List),
                prop::collection::vec((inner.clone(), inner.clone()), 0..4).prop_map(Payload::map),
                ("[a-z_][a-z0-9_]{0,6}", inner).prop_filter_map("keyword", |(n, a)| {
                    is_ident(&n).then(|| Payload::tag(n, a))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(p in arb_payload()) {
            prop_assert!(p.is_canonical());
            let text = p.to_string();
            prop_assert_eq!(Payload::parse(&text).unwrap(), p);
        }
    }
}
