use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;

/// Arbitrary-precision natural number.
pub type Nat = BigUint;
/// Arbitrary-precision signed integer.
pub type Int = BigInt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AddressKind {
    User,
    Contract,
}

/// An account on the simulated chain.
///
/// Contract addresses are only minted by deployment. `Address::NULL`
/// (contract kind, index 0) is reserved and never hosts code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address {
    pub kind: AddressKind,
    pub index: u64,
}

impl Address {
    pub const NULL: Address = Address {
        kind: AddressKind::Contract,
        index: 0,
    };

    pub const fn user(index: u64) -> Self {
        Address {
            kind: AddressKind::User,
            index,
        }
    }

    pub const fn contract(index: u64) -> Self {
        Address {
            kind: AddressKind::Contract,
            index,
        }
    }

    pub fn is_user(&self) -> bool {
        self.kind == AddressKind::User
    }

    pub fn is_contract(&self) -> bool {
        self.kind == AddressKind::Contract
    }

    pub fn is_null(&self) -> bool {
        *self == Self::NULL
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AddressKind::User => write!(f, "@u{}", self.index),
            AddressKind::Contract => write!(f, "@c{}", self.index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid address literal `{0}`")]
pub struct AddressParseError(pub String);

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AddressParseError(s.to_string());
        let rest = s.strip_prefix('@').ok_or_else(err)?;
        let (kind, digits) = if let Some(d) = rest.strip_prefix('u') {
            (AddressKind::User, d)
        } else if let Some(d) = rest.strip_prefix('c') {
            (AddressKind::Contract, d)
        } else {
            return Err(err());
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let index = digits.parse().map_err(|_| err())?;
        Ok(Address { kind, index })
    }
}

/// Amount of the native currency, in mutez.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tez(pub Nat);

impl Tez {
    pub fn zero() -> Self {
        Tez(Nat::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_sub(&self, other: &Tez) -> Option<Tez> {
        crate::arith::sub_opt(&self.0, &other.0).map(Tez)
    }
}

impl From<u64> for Tez {
    fn from(v: u64) -> Self {
        Tez(Nat::from(v))
    }
}

impl From<Nat> for Tez {
    fn from(v: Nat) -> Self {
        Tez(v)
    }
}

impl Add for Tez {
    type Output = Tez;
    fn add(self, rhs: Tez) -> Tez {
        Tez(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Tez> for &'a Tez {
    type Output = Tez;
    fn add(self, rhs: &'a Tez) -> Tez {
        Tez(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Tez> for Tez {
    fn add_assign(&mut self, rhs: &Tez) {
        self.0 += &rhs.0;
    }
}

impl std::iter::Sum for Tez {
    fn sum<I: Iterator<Item = Tez>>(iter: I) -> Tez {
        iter.fold(Tez::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Tez {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
