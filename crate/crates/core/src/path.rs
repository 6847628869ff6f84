//! Locations of subformulas inside a service: `/d.2`, `/q.1`, `/d.i`.

use std::fmt;

use crate::term::Symbol;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Segment {
    Index(u32),
    /// A script variable, resolved when the statement runs.
    Var(Symbol),
}

/// A path as written in a script; segments may name script variables.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Path {
    pub dir: Symbol,
    pub segments: Vec<Segment>,
}

/// A fully resolved path. Under a recurrence node a segment selects a
/// replica; elsewhere it selects a child (1 = left/only, 2 = right).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Location {
    pub dir: Symbol,
    pub indices: Vec<u32>,
}

impl Location {
    pub fn root(dir: Symbol) -> Self {
        Location { dir, indices: Vec::new() }
    }

    pub fn child(&self, index: u32) -> Self {
        let mut indices = self.indices.clone();
        indices.push(index);
        Location { dir: self.dir.clone(), indices }
    }
}

impl Path {
    pub fn resolve<E>(&self, mut lookup: impl FnMut(&Symbol) -> Result<u32, E>) -> Result<Location, E> {
        let indices = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Index(i) => Ok(*i),
                Segment::Var(v) => lookup(v),
            })
            .collect::<Result<_, _>>()?;
        Ok(Location { dir: self.dir.clone(), indices })
    }
}

impl From<&Location> for Path {
    fn from(loc: &Location) -> Self {
        Path { dir: loc.dir.clone(), segments: loc.indices.iter().map(|i| Segment::Index(*i)).collect() }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}", self.dir)?;
        for i in &self.indices {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}", self.dir)?;
        for s in &self.segments {
            match s {
                Segment::Index(i) => write!(f, ".{i}")?,
                Segment::Var(v) => write!(f, ".{v}")?,
            }
        }
        Ok(())
    }
}
