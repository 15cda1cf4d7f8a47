use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Five-digit county code. The first two digits are the state.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId([u8; 5]);

/// Two-digit state code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateCode([u8; 2]);

impl RegionId {
    pub fn parse(code: &str) -> Result<Self, Error> {
        let bytes = code.as_bytes();
        if bytes.len() != 5 || !bytes.iter().all(u8::is_ascii_digit) {
            return Err(Error::InvalidRegion(code.to_string()));
        }
        let mut out = [0u8; 5];
        out.copy_from_slice(bytes);
        Ok(RegionId(out))
    }

    /// Builds a code from a state number and a county number within it.
    pub fn from_parts(state: u32, county: u32) -> Option<Self> {
        if state > 99 || county > 999 {
            return None;
        }
        RegionId::parse(&format!("{state:02}{county:03}")).ok()
    }

    pub fn state(&self) -> StateCode {
        StateCode([self.0[0], self.0[1]])
    }

    pub fn as_str(&self) -> &str {
        // always ASCII digits
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl StateCode {
    pub fn parse(code: &str) -> Result<Self, Error> {
        let bytes = code.as_bytes();
        if bytes.len() != 2 || !bytes.iter().all(u8::is_ascii_digit) {
            return Err(Error::InvalidRegion(code.to_string()));
        }
        Ok(StateCode([bytes[0], bytes[1]]))
    }

    pub fn from_number(state: u32) -> Option<Self> {
        if state > 99 {
            return None;
        }
        StateCode::parse(&format!("{state:02}")).ok()
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl FromStr for RegionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegionId::parse(s)
    }
}

impl FromStr for StateCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateCode::parse(s)
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegionId({})", self.as_str())
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateCode({})", self.as_str())
    }
}

impl Serialize for RegionId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RegionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        RegionId::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Serialize for StateCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StateCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        StateCode::parse(&s).map_err(serde::de::Error::custom)
    }
}
