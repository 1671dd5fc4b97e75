use std::fmt;

/// Two-letter DICOM value representation code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vr([u8; 2]);

const fn code(s: &str) -> Vr {
    let b = s.as_bytes();
    Vr([b[0], b[1]])
}

macro_rules! vrs {
    ($($name:ident),*) => {
        impl Vr {
            $(pub const $name: Vr = code(stringify!($name));)*
        }
    };
}

vrs!(AE, AS, AT, CS, DA, DS, DT, FD, FL, IS, LO, LT, OB, OD, OF, OL, OV, OW, PN, SH, SL, SQ, SS, ST, SV, TM, UC, UI, UL, UN, UR, US, UT, UV);

impl Vr {
    pub const fn from_bytes(b: [u8; 2]) -> Self {
        Vr(b)
    }

    pub fn as_bytes(self) -> [u8; 2] {
        self.0
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap_or("??")
    }

    /// Explicit-VR encodings of these use a 2-byte reserved field and a
    /// 4-byte length.
    pub fn has_long_length(self) -> bool {
        matches!(
            self,
            Vr::OB | Vr::OD | Vr::OF | Vr::OL | Vr::OV | Vr::OW | Vr::SQ | Vr::SV | Vr::UC
                | Vr::UN | Vr::UR | Vr::UT | Vr::UV
        )
    }

    /// Character-string VRs whose values are exposed as text.
    pub fn is_text(self) -> bool {
        matches!(
            self,
            Vr::AE | Vr::AS | Vr::CS | Vr::DA | Vr::DS | Vr::DT | Vr::IS | Vr::LO | Vr::LT
                | Vr::PN | Vr::SH | Vr::ST | Vr::TM | Vr::UC | Vr::UI | Vr::UR | Vr::UT
        )
    }

    /// Padding byte used to bring odd-length values to even length.
    pub fn padding(self) -> u8 {
        if self.is_text() {
            if self == Vr::UI {
                0
            } else {
                b' '
            }
        } else {
            0
        }
    }

    pub fn is_valid_code(b: [u8; 2]) -> bool {
        b.iter().all(|c| c.is_ascii_uppercase())
    }
}

impl fmt::Debug for Vr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Vr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Vr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 2 && Vr::is_valid_code([b[0], b[1]]) {
            Ok(Vr([b[0], b[1]]))
        } else {
            Err(format!("invalid VR {s:?}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_classes() {
        assert_eq!(Vr::PN.as_str(), "PN");
        assert!(Vr::SQ.has_long_length());
        assert!(!Vr::LO.has_long_length());
        assert!(Vr::UI.is_text());
        assert_eq!(Vr::UI.padding(), 0);
        assert_eq!(Vr::LO.padding(), b' ');
        assert!("Xy".parse::<Vr>().is_err());
    }
}
