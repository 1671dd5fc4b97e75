use std::fmt;
use std::str::FromStr;

use super::DicomError;

/// A DICOM data element tag, `(group, element)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub group: u16,
    pub element: u16,
}

impl Tag {
    pub const fn new(group: u16, element: u16) -> Self {
        Self { group, element }
    }

    /// Private tags live in odd groups.
    pub fn is_private(self) -> bool {
        self.group % 2 == 1
    }

    /// Private creator elements, `(gggg,0010)` through `(gggg,00FF)` in an odd group.
    pub fn is_private_creator(self) -> bool {
        self.is_private() && (0x0010..=0x00FF).contains(&self.element)
    }

    pub fn is_file_meta(self) -> bool {
        self.group == 0x0002
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.group, self.element)
    }
}

impl FromStr for Tag {
    type Err = DicomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DicomError::BadTag(s.to_string());
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (g, e) = inner.split_once(',').ok_or_else(bad)?;
        if g.len() != 4 || e.len() != 4 {
            return Err(bad());
        }
        let group = u16::from_str_radix(g, 16).map_err(|_| bad())?;
        let element = u16::from_str_radix(e, 16).map_err(|_| bad())?;
        Ok(Tag { group, element })
    }
}

/// One step of a [`TagPath`]. Non-terminal steps name a sequence and the
/// zero-based item to descend into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathSegment {
    pub tag: Tag,
    pub item: Option<usize>,
}

/// Address of an element inside a possibly nested data set, rendered as
/// `(0040,0275)[0]/(0008,0050)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagPath {
    segments: Vec<PathSegment>,
}

impl TagPath {
    /// A flat path to a top-level element.
    pub fn root(tag: Tag) -> Self {
        Self {
            segments: vec![PathSegment { tag, item: None }],
        }
    }

    pub fn from_segments(segments: Vec<PathSegment>) -> Result<Self, DicomError> {
        let path = Self { segments };
        path.check()?;
        Ok(path)
    }

    fn check(&self) -> Result<(), DicomError> {
        let Some((last, init)) = self.segments.split_last() else {
            return Err(DicomError::BadPath("empty path".into()));
        };
        if last.item.is_some() || init.iter().any(|s| s.item.is_none()) {
            return Err(DicomError::BadPath(self.to_string()));
        }
        Ok(())
    }

    /// Extends a path by descending into `item` of the terminal sequence and
    /// addressing `tag` inside it.
    pub fn child(&self, item: usize, tag: Tag) -> Self {
        let mut segments = self.segments.clone();
        if let Some(last) = segments.last_mut() {
            last.item = Some(item);
        }
        segments.push(PathSegment { tag, item: None });
        Self { segments }
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    /// Tag of the addressed leaf.
    pub fn terminal(&self) -> Tag {
        self.segments[self.segments.len() - 1].tag
    }

    pub fn is_nested(&self) -> bool {
        self.segments.len() > 1
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }
}

impl From<Tag> for TagPath {
    fn from(tag: Tag) -> Self {
        TagPath::root(tag)
    }
}

impl fmt::Display for TagPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{}", seg.tag)?;
            if let Some(item) = seg.item {
                write!(f, "[{item}]")?;
            }
        }
        Ok(())
    }
}

impl FromStr for TagPath {
    type Err = DicomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut segments = Vec::new();
        for part in s.trim().split('/') {
            let (tag_text, item) = match part.find('[') {
                Some(open) => {
                    let idx = part[open + 1..]
                        .strip_suffix(']')
                        .and_then(|n| n.parse::<usize>().ok())
                        .ok_or_else(|| DicomError::BadPath(s.to_string()))?;
                    (&part[..open], Some(idx))
                }
                None => (part, None),
            };
            let tag = tag_text.parse::<Tag>().map_err(|_| DicomError::BadPath(s.to_string()))?;
            segments.push(PathSegment { tag, item });
        }
        let path = Self { segments };
        path.check().map_err(|_| DicomError::BadPath(s.to_string()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_uppercase_zero_padded() {
        assert_eq!(Tag::new(0x10, 0x10).to_string(), "(0010,0010)");
        assert_eq!(Tag::new(0x7fe0, 0x10).to_string(), "(7FE0,0010)");
        assert_eq!(Tag::new(0x0020, 0x000e).to_string(), "(0020,000E)");
    }

    #[test]
    fn private_is_odd_group() {
        assert!(Tag::new(0x0009, 0x1001).is_private());
        assert!(!Tag::new(0x0010, 0x0010).is_private());
        assert!(Tag::new(0x0009, 0x0010).is_private_creator());
        assert!(!Tag::new(0x0009, 0x1001).is_private_creator());
    }

    #[test]
    fn parses_tags_and_rejects_garbage() {
        assert_eq!("(0008,0050)".parse::<Tag>().unwrap(), Tag::new(8, 0x50));
        assert_eq!("(7fe0,0010)".parse::<Tag>().unwrap(), Tag::new(0x7fe0, 0x10));
        for bad in ["0008,0050", "(008,0050)", "(0008;0050)", "(GGGG,0000)", ""] {
            assert!(bad.parse::<Tag>().is_err(), "{bad}");
        }
    }

    #[test]
    fn nested_path_syntax() {
        let p: TagPath = "(0040,0275)[0]/(0008,0050)".parse().unwrap();
        assert_eq!(p.depth(), 2);
        assert_eq!(p.terminal(), Tag::new(8, 0x50));
        assert_eq!(p.to_string(), "(0040,0275)[0]/(0008,0050)");
        assert_eq!(TagPath::root(Tag::new(0x40, 0x275)).child(0, Tag::new(8, 0x50)), p);
    }

    #[test]
    fn path_invariants_enforced() {
        assert!("(0040,0275)/(0008,0050)".parse::<TagPath>().is_err());
        assert!("(0008,0050)[1]".parse::<TagPath>().is_err());
        assert!(TagPath::from_segments(vec![]).is_err());
    }
}
