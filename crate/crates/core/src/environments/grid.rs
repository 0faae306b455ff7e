//! Text grid maps.
//!
//! One row per line over `# . S G R B`; lines starting with `;` are
//! comments and blank lines are skipped. Maps must be rectangular and
//! enclosed by walls, with exactly one `S` and one `G`. `R` (rock) is only
//! valid for Mars rover maps; Box maps need exactly one `B`.

use std::path::Path;

use super::EnvError;

/// 8x8 Mars rover map shipped with the crate (an artifact default, not a
/// published layout).
pub const DEFAULT_MARS_MAP: &str = include_str!("../../maps/mars_8x8.map");
/// 6x6 Box room shipped with the crate (an artifact default).
pub const DEFAULT_BOX_MAP: &str = include_str!("../../maps/box_6x6.map");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    MarsRover,
    Box,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    kind: MapKind,
    rows: Vec<Vec<u8>>,
}

impl GridMap {
    pub fn parse(text: &str, kind: MapKind) -> Result<Self, EnvError> {
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let mut lines: Vec<usize> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with(';') {
                continue;
            }
            let line_no = idx + 1;
            let bytes = line.as_bytes().to_vec();
            for (col, &ch) in bytes.iter().enumerate() {
                let ok = match ch {
                    b'#' | b'.' | b'S' | b'G' => true,
                    b'R' => kind == MapKind::MarsRover,
                    b'B' => kind == MapKind::Box,
                    _ => false,
                };
                if !ok {
                    return Err(EnvError::Map {
                        line: line_no,
                        column: col + 1,
                        reason: format!("unexpected character {:?}", ch as char),
                    });
                }
            }
            if let Some(first) = rows.first() {
                if first.len() != bytes.len() {
                    return Err(EnvError::Map {
                        line: line_no,
                        column: bytes.len().min(first.len()) + 1,
                        reason: format!("row has {} cells, expected {}", bytes.len(), first.len()),
                    });
                }
            }
            rows.push(bytes);
            lines.push(line_no);
        }
        if rows.len() < 3 || rows[0].len() < 3 {
            return Err(EnvError::MapShape(
                "map needs at least 3 rows and 3 columns".into(),
            ));
        }
        let (height, width) = (rows.len(), rows[0].len());
        for (r, row) in rows.iter().enumerate() {
            for (c, &ch) in row.iter().enumerate() {
                let border = r == 0 || c == 0 || r + 1 == height || c + 1 == width;
                if border && ch != b'#' {
                    return Err(EnvError::Map {
                        line: lines[r],
                        column: c + 1,
                        reason: "border cell is not a wall".into(),
                    });
                }
            }
        }
        let count = |target: u8| rows.iter().flatten().filter(|&&ch| ch == target).count();
        for (symbol, name) in [(b'S', "start"), (b'G', "goal")] {
            let n = count(symbol);
            if n != 1 {
                return Err(EnvError::MapShape(format!(
                    "expected exactly one {name} cell, found {n}"
                )));
            }
        }
        if kind == MapKind::Box && count(b'B') != 1 {
            return Err(EnvError::MapShape(format!(
                "expected exactly one box cell, found {}",
                count(b'B')
            )));
        }
        Ok(Self { kind, rows })
    }

    pub fn load(path: &Path, kind: MapKind) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, kind)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    pub fn at(&self, row: usize, col: usize) -> char {
        self.rows[row][col] as char
    }

    pub fn is_wall(&self, row: usize, col: usize) -> bool {
        self.rows[row][col] == b'#'
    }

    fn find(&self, target: u8) -> Option<(usize, usize)> {
        self.rows
            .iter()
            .enumerate()
            .find_map(|(r, row)| row.iter().position(|&ch| ch == target).map(|c| (r, c)))
    }

    pub fn start(&self) -> (usize, usize) {
        self.find(b'S').expect("validated at parse time")
    }

    pub fn goal(&self) -> (usize, usize) {
        self.find(b'G').expect("validated at parse time")
    }

    pub fn box_start(&self) -> Option<(usize, usize)> {
        self.find(b'B')
    }

    /// Non-wall cells in row-major order.
    pub fn open_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.height() {
            for c in 0..self.width() {
                if !self.is_wall(r, c) {
                    out.push((r, c));
                }
            }
        }
        out
    }

    /// A non-wall cell with at least two orthogonally adjacent walls.
    pub fn is_corner(&self, row: usize, col: usize) -> bool {
        if self.is_wall(row, col) {
            return false;
        }
        let walls = [
            (row - 1, col),
            (row + 1, col),
            (row, col - 1),
            (row, col + 1),
        ]
        .iter()
        .filter(|(r, c)| self.is_wall(*r, *c))
        .count();
        walls >= 2
    }

    /// Neighbour in direction `(dr, dc)`; border walls keep this in range.
    pub(crate) fn step(
        &self,
        (row, col): (usize, usize),
        (dr, dc): (isize, isize),
    ) -> (usize, usize) {
        ((row as isize + dr) as usize, (col as isize + dc) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let mars = GridMap::parse(DEFAULT_MARS_MAP, MapKind::MarsRover).unwrap();
        assert_eq!((mars.height(), mars.width()), (8, 8));
        let boxes = GridMap::parse(DEFAULT_BOX_MAP, MapKind::Box).unwrap();
        assert_eq!((boxes.height(), boxes.width()), (6, 6));
    }

    #[test]
    fn errors_carry_position() {
        let err = GridMap::parse("###\n#S#\n#G.\n###\n", MapKind::MarsRover).unwrap_err();
        assert!(
            matches!(
                err,
                EnvError::Map {
                    line: 3,
                    column: 3,
                    ..
                }
            ),
            "{err}"
        );
        let err = GridMap::parse("; comment\n####\n#SG#\n###\n", MapKind::MarsRover).unwrap_err();
        assert!(matches!(err, EnvError::Map { line: 4, .. }), "{err}");
        let err = GridMap::parse("####\n#SX#\n#G.#\n####\n", MapKind::MarsRover).unwrap_err();
        assert!(
            matches!(
                err,
                EnvError::Map {
                    line: 2,
                    column: 3,
                    ..
                }
            ),
            "{err}"
        );
        assert!(GridMap::parse("####\n#SR#\n#G.#\n####\n", MapKind::Box).is_err());
        assert!(GridMap::parse("####\n#S.#\n#..#\n####\n", MapKind::MarsRover).is_err());
        assert!(GridMap::parse("####\n#SG#\n#..#\n####\n", MapKind::Box).is_err());
    }

    #[test]
    fn corners_of_open_room() {
        let map = GridMap::parse(
            "######\n#S...#\n#.B..#\n#....#\n#...G#\n######\n",
            MapKind::Box,
        )
        .unwrap();
        let corners: Vec<_> = map
            .open_cells()
            .into_iter()
            .filter(|&(r, c)| map.is_corner(r, c))
            .collect();
        assert_eq!(corners, vec![(1, 1), (1, 4), (4, 1), (4, 4)]);
        let small = GridMap::parse("####\n#SB#\n#.G#\n####\n", MapKind::Box).unwrap();
        assert_eq!(
            small
                .open_cells()
                .iter()
                .filter(|&&(r, c)| small.is_corner(r, c))
                .count(),
            4
        );
    }
}
