use serde::{Deserialize, Serialize};

use super::MetamodelError;

/// One axis of a uniform grid, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub fn unit(step: f64) -> Self {
        Self { lo: 0.0, hi: 1.0, step }
    }

    pub fn count(&self) -> Result<usize, MetamodelError> {
        if !(self.step > 0.0) {
            return Err(MetamodelError::Config(format!("grid step {} must be positive", self.step)));
        }
        if !(self.hi >= self.lo) {
            return Err(MetamodelError::Config(format!("grid range [{}, {}] is empty", self.lo, self.hi)));
        }
        let cells = (self.hi - self.lo) / self.step;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(MetamodelError::Config(format!(
                "step {} does not divide [{}, {}]",
                self.step, self.lo, self.hi
            )));
        }
        Ok(cells.round() as usize + 1)
    }

    /// The axis values; the last one is exactly `hi`.
    pub fn values(&self) -> Result<Vec<f64>, MetamodelError> {
        let n = self.count()?;
        Ok((0..n)
            .map(|i| if i + 1 == n { self.hi } else { self.lo + (self.hi - self.lo) * (i as f64 / (n - 1) as f64) })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    /// `dims` copies of the unit interval split by `step`.
    pub fn unit_cube(dims: usize, step: f64) -> Self {
        Self::new(vec![Axis::unit(step); dims])
    }

    pub fn len(&self) -> Result<usize, MetamodelError> {
        self.axes.iter().map(|a| a.count()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }
}

/// Cartesian product of the axes in lexicographic order (last axis
/// fastest).
pub fn make_grid(spec: &GridSpec) -> Result<Vec<Vec<f64>>, MetamodelError> {
    let axes = spec.axes.iter().map(|a| a.values()).collect::<Result<Vec<_>, _>>()?;
    let mut points = vec![Vec::new()];
    for values in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        assert_eq!(make_grid(&GridSpec::unit_cube(3, 0.5)).unwrap().len(), 27);
        assert_eq!(make_grid(&GridSpec::unit_cube(3, 0.05)).unwrap().len(), 9261);
        assert_eq!(make_grid(&GridSpec::unit_cube(2, 0.025)).unwrap().len(), 1681);
    }

    #[test]
    fn lexicographic_with_exact_endpoints() {
        let g = make_grid(&GridSpec::unit_cube(2, 0.5)).unwrap();
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_eq!(g[1], vec![0.0, 0.5]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        let v = Axis::unit(0.05).values().unwrap();
        assert_eq!(v[20], 1.0);
    }

    #[test]
    fn bad_steps() {
        assert!(Axis::unit(0.0).count().is_err());
        assert!(Axis::unit(0.3).count().is_err());
    }
}
