//! Connected-component labeling of binary grids.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::mask::Bitmap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

const N4: [(i32, i32); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
const N8: [(i32, i32); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl Connectivity {
    pub fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Connectivity::Four => &N4,
            Connectivity::Eight => &N8,
        }
    }
}

/// A maximal connected set of on-pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// 1-based, in order of the component's first pixel in scanline order.
    pub id: u32,
    /// Row-major pixel indices, ascending.
    pub pixels: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.pixels.len()
    }
}

/// Labels the on-pixels of `grid`.
pub fn connected_components(grid: &Bitmap, connectivity: Connectivity) -> Vec<Component> {
    let (w, h) = grid.dims();
    let (wi, hi) = (w as i32, h as i32);
    let bits = grid.as_slice();
    let mut visited = vec![false; bits.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = ((i % w as usize) as i32, (i / w as usize) as i32);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= wi || ny >= hi {
                    continue;
                }
                let j = ny as usize * w as usize + nx as usize;
                if bits[j] && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        pixels.sort_unstable();
        components.push(Component {
            id: components.len() as u32 + 1,
            pixels,
        });
    }
    components
}
