//! Domain types shared across the pipeline.
//!
//! Everything here is immutable once built; share freely across threads.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Binary symmetric adjacency with every node self-connected.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: Array2<u8>,
    neighbours: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from an undirected edge list. Edges are mirrored and
    /// self-loops are added for every node.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Config("topology needs at least one node".into()));
        }
        let mut adjacency = Array2::<u8>::zeros((n_nodes, n_nodes));
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::dims(
                    format!("node index < {n_nodes}"),
                    format!("edge ({u}, {v})"),
                ));
            }
            adjacency[[u, v]] = 1;
            adjacency[[v, u]] = 1;
        }
        Ok(Self::from_symmetric(adjacency))
    }

    /// Builds a topology from a 0/1 matrix. The matrix must be square, binary
    /// and symmetric; the diagonal is forced to 1.
    pub fn from_adjacency(matrix: &Array2<u8>) -> Result<Self> {
        let (n, m) = matrix.dim();
        if n != m || n == 0 {
            return Err(Error::dims("non-empty square adjacency", format!("{n}x{m}")));
        }
        for ((u, v), &a) in matrix.indexed_iter() {
            if a > 1 {
                return Err(Error::parse(
                    format!("adjacency entry ({u}, {v})"),
                    format!("expected 0 or 1, found {a}"),
                ));
            }
            if matrix[[v, u]] != a {
                return Err(Error::Asymmetry { max_diff: 1.0 });
            }
        }
        Ok(Self::from_symmetric(matrix.clone()))
    }

    pub fn complete(n_nodes: usize) -> Self {
        Self::from_symmetric(Array2::from_elem((n_nodes, n_nodes), 1))
    }

    pub fn self_loops_only(n_nodes: usize) -> Self {
        Self::from_symmetric(Array2::zeros((n_nodes, n_nodes)))
    }

    fn from_symmetric(mut adjacency: Array2<u8>) -> Self {
        let n = adjacency.nrows();
        for u in 0..n {
            adjacency[[u, u]] = 1;
        }
        let neighbours = (0..n)
            .map(|u| (0..n).filter(|&v| adjacency[[u, v]] == 1).collect())
            .collect();
        Self {
            adjacency,
            neighbours,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adjacency
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[[u, v]] == 1
    }

    /// Neighbourhood of `u`, sorted ascending and always containing `u`.
    pub fn neighbours(&self, u: usize) -> &[usize] {
        &self.neighbours[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbours[u].len()
    }

    /// Number of off-diagonal edges counted once per unordered pair.
    pub fn n_edges(&self) -> usize {
        let n = self.n_nodes();
        (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| self.has_edge(u, v))
            .count()
    }
}

/// One window of the multichannel signal: row `u` holds node `u`'s samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignalSample {
    pub values: Array2<f64>,
    pub index: usize,
    pub timestamp: Option<f64>,
    pub label: Option<u8>,
}

impl GraphSignalSample {
    pub fn new(values: Array2<f64>, index: usize) -> Self {
        Self {
            values,
            index,
            timestamp: None,
            label: None,
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn t_len(&self) -> usize {
        self.values.ncols()
    }
}

pub fn validate_sample(
    sample: &GraphSignalSample,
    expected_n: usize,
    expected_t: usize,
) -> Result<()> {
    let (n, t) = sample.values.dim();
    if (n, t) != (expected_n, expected_t) {
        return Err(Error::dims(
            format!("{expected_n}x{expected_t}"),
            format!("{n}x{t}"),
        ));
    }
    if let Some(((row, col), _)) = sample.values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row, col });
    }
    Ok(())
}

/// Node feature matrix stored as separate real and imaginary planes.
///
/// Time-domain features carry no imaginary plane at all, which keeps the
/// "imaginary part identically zero" invariant structural.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub re: Array2<f64>,
    pub im: Option<Array2<f64>>,
}

impl FeatureMatrix {
    pub fn real(re: Array2<f64>) -> Self {
        Self { re, im: None }
    }

    pub fn complex(re: Array2<f64>, im: Array2<f64>) -> Self {
        debug_assert_eq!(re.dim(), im.dim());
        Self { re, im: Some(im) }
    }

    pub fn from_complex(values: &Array2<Complex64>) -> Self {
        Self::complex(values.mapv(|c| c.re), values.mapv(|c| c.im))
    }

    pub fn n_nodes(&self) -> usize {
        self.re.nrows()
    }

    pub fn width(&self) -> usize {
        self.re.ncols()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn to_complex(&self) -> Array2<Complex64> {
        match &self.im {
            Some(im) => ndarray::Zip::from(&self.re)
                .and(im)
                .map_collect(|&re, &im| Complex64::new(re, im)),
            None => self.re.mapv(|re| Complex64::new(re, 0.0)),
        }
    }

    pub fn row(&self, u: usize) -> Array1<Complex64> {
        let re = self.re.row(u);
        match &self.im {
            Some(im) => re
                .iter()
                .zip(im.row(u))
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
            None => re.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        }
    }

    /// Iterates over the planes present: the real plane first, then the
    /// imaginary plane if any.
    pub fn planes(&self) -> impl Iterator<Item = &Array2<f64>> {
        std::iter::once(&self.re).chain(self.im.as_ref())
    }
}

/// Initial features `h^0` and final hidden features `h^K` for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub initial: FeatureMatrix,
    pub hidden: FeatureMatrix,
}

impl EmbeddingSet {
    pub fn new(initial: FeatureMatrix, hidden: FeatureMatrix) -> Result<Self> {
        if initial.re.dim() != hidden.re.dim() {
            return Err(Error::dims(
                format!("{:?}", initial.re.dim()),
                format!("{:?}", hidden.re.dim()),
            ));
        }
        if initial.is_real() != hidden.is_real() {
            return Err(Error::Config(
                "initial and hidden features must share the same domain".into(),
            ));
        }
        Ok(Self { initial, hidden })
    }

    pub fn n_nodes(&self) -> usize {
        self.initial.n_nodes()
    }

    /// Length `D0` of a node's initial feature vector.
    pub fn initial_width(&self) -> usize {
        self.initial.width()
    }

    /// Length `D = 2 D0` of a full embedding.
    pub fn embedding_width(&self) -> usize {
        2 * self.initial.width()
    }

    pub fn is_real(&self) -> bool {
        self.initial.is_real()
    }

    /// `N x D` complex matrix whose row `u` is `[h0_u ; hK_u]`.
    pub fn combined(&self) -> Array2<Complex64> {
        ndarray::concatenate(
            Axis(1),
            &[self.initial.to_complex().view(), self.hidden.to_complex().view()],
        )
        .expect("initial and hidden share a row count")
    }

    /// Real part of the combined embedding matrix.
    pub fn combined_real(&self) -> Array2<f64> {
        ndarray::concatenate(Axis(1), &[self.initial.re.view(), self.hidden.re.view()])
            .expect("initial and hidden share a row count")
    }
}

/// Real symmetric node-by-node similarity, the learned graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, m) = values.dim();
        if n != m {
            return Err(Error::dims("square matrix", format!("{n}x{m}")));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row, col });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n_nodes();
        let mut worst = 0.0f64;
        for u in 0..n {
            for v in u + 1..n {
                worst = worst.max((self.values[[u, v]] - self.values[[v, u]]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.max_asymmetry() == 0.0
    }

    pub fn column(&self, v: usize) -> ArrayView1<'_, f64> {
        self.values.column(v)
    }
}
