use super::Real;

/// Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
///
/// Nodes are seeded in f64 and polished by Newton steps in `T`, so the
/// rule is accurate to the working precision of `T`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::from_f64(k as f64);
        let p2 = (T::from_f64((2 * k - 1) as f64) * x * p1 - T::from_f64((k - 1) as f64) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // derivative from the standard recurrence
    let dp = T::from_f64(n as f64) * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        for i in 0..n {
            let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut x = T::from_f64(guess);
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.to_f64().abs() < 1e-17 {
                    let (p, dp) = legendre(n, x);
                    x -= p / dp;
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = T::from_f64(2.0) / ((T::one() - x * x) * dp * dp);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]` with a single panel.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * T::from_f64(0.5);
        let mid = (b + a) * T::from_f64(0.5);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * f(mid + half * *x);
        }
        acc * half
    }

    /// Composite rule over the consecutive breakpoints `edges`.
    pub fn integrate_panels<F: FnMut(T) -> T>(&self, edges: &[T], mut f: F) -> T {
        let mut acc = T::zero();
        for w in edges.windows(2) {
            acc += self.integrate(w[0], w[1], &mut f);
        }
        acc
    }
}
