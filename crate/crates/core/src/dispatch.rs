//! Work-item enumeration for simulated kernel passes.
//!
//! A pass runs over a 2D grid of work items grouped into local work groups of
//! [`LOCAL_SIZE`]x[`LOCAL_SIZE`] (clamped to the grid). Groups are issued in
//! row-major order and items inside a group in row-major order; the issue
//! position is the work item id. Traces are consumed in this order.

use crate::Result;

pub const LOCAL_SIZE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispatchOrder {
    #[default]
    Tiled,
    /// Same ids, executed back to front. Kernels must produce identical output.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub width: u32,
    pub height: u32,
}

impl Grid {
    pub fn new(width: u32, height: u32) -> Self {
        Grid { width, height }
    }

    pub fn len(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid coordinate of work item `id`.
    pub fn coord(&self, id: u32) -> (u32, u32) {
        let lw = LOCAL_SIZE.min(self.width);
        let lh = LOCAL_SIZE.min(self.height);
        // Every group row but the last holds lh full rows.
        let gy = id / (lh * self.width);
        let rem = id - gy * lh * self.width;
        let rows = lh.min(self.height - gy * lh);
        let gx = rem / (lw * rows);
        let rem = rem - gx * lw * rows;
        let cols = lw.min(self.width - gx * lw);
        (gx * lw + rem % cols, gy * lh + rem / cols)
    }

    /// Visits every work item as `(id, x, y)` in issue order (or reversed).
    pub fn for_each<F>(&self, order: DispatchOrder, mut f: F) -> Result<()>
    where
        F: FnMut(u32, u32, u32) -> Result<()>,
    {
        if self.is_empty() {
            return Ok(());
        }
        match order {
            DispatchOrder::Tiled => {
                let lw = LOCAL_SIZE.min(self.width);
                let lh = LOCAL_SIZE.min(self.height);
                let mut id = 0u32;
                let mut gy0 = 0;
                while gy0 < self.height {
                    let gy1 = (gy0 + lh).min(self.height);
                    let mut gx0 = 0;
                    while gx0 < self.width {
                        let gx1 = (gx0 + lw).min(self.width);
                        for y in gy0..gy1 {
                            for x in gx0..gx1 {
                                f(id, x, y)?;
                                id += 1;
                            }
                        }
                        gx0 = gx1;
                    }
                    gy0 = gy1;
                }
                Ok(())
            }
            DispatchOrder::Reversed => {
                let n = self.len() as u32;
                for id in (0..n).rev() {
                    let (x, y) = self.coord(id);
                    f(id, x, y)?;
                }
                Ok(())
            }
        }
    }
}
