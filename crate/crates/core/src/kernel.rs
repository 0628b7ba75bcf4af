//! Statevector kernels over split real/imaginary storage, used by the
//! circuit engine. Keeping the two parts in separate arrays lets the inner
//! loops vectorise; on x86-64 the kernels are also compiled for AVX2 and
//! picked at run time. Floating-point contraction stays off, so both paths
//! give identical results.

use crate::sim::{Mat2, C64};

const LANES: usize = 4;

#[derive(Debug, Default, Clone)]
pub(crate) struct SplitState {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SplitState {
    /// `|0...0>` on `n` qubits.
    pub fn reset(&mut self, n: usize) {
        let len = 1usize << n;
        self.re.clear();
        self.re.resize(len, 0.0);
        self.im.clear();
        self.im.resize(len, 0.0);
        self.re[0] = 1.0;
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn copy_from(&mut self, other: &SplitState) {
        self.re.clear();
        self.re.extend_from_slice(&other.re);
        self.im.clear();
        self.im.extend_from_slice(&other.im);
    }

    pub fn to_complex(&self) -> Vec<C64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| C64::new(r, i))
            .collect()
    }

    /// Multiplies every amplitude with bit `q` set by -1.
    pub fn negate_bit(&mut self, q: usize) {
        for (_, hi, n) in Runs::new(self.len(), q, None) {
            self.re[hi..hi + n].iter_mut().for_each(|v| *v = -*v);
            self.im[hi..hi + n].iter_mut().for_each(|v| *v = -*v);
        }
    }

    /// Swaps the halves differing in bit `q` (Pauli X on `q`).
    pub fn flip_bit(&mut self, q: usize) {
        for (lo, hi, n) in Runs::new(self.len(), q, None) {
            let (a, b) = split(&mut self.re, lo, hi, n);
            a.swap_with_slice(b);
            let (a, b) = split(&mut self.im, lo, hi, n);
            a.swap_with_slice(b);
        }
    }

    pub fn expectation_z(&self, q: usize) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, n) in Runs::new(self.len(), q, None) {
            acc += dot(&self.re[lo..lo + n], &self.re[lo..lo + n])
                + dot(&self.im[lo..lo + n], &self.im[lo..lo + n]);
            acc -= dot(&self.re[hi..hi + n], &self.re[hi..hi + n])
                + dot(&self.im[hi..hi + n], &self.im[hi..hi + n]);
        }
        acc
    }

    pub fn expectation_x(&self, q: usize) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, n) in Runs::new(self.len(), q, None) {
            acc += dot(&self.re[lo..lo + n], &self.re[hi..hi + n]);
            acc += dot(&self.im[lo..lo + n], &self.im[hi..hi + n]);
        }
        2.0 * acc
    }
}

/// Runs `(lo, hi, n)` of `n` index pairs `(lo + k, hi + k)` that differ only
/// in bit `target` and have the control bit set (if any).
struct Runs {
    len: usize,
    st: usize,
    /// Control stride when the control is above the target.
    outer: Option<usize>,
    /// Control stride when the control is below the target.
    inner: Option<usize>,
    block: usize,
    base: usize,
    sub: usize,
}

impl Runs {
    fn new(len: usize, target: usize, control: Option<usize>) -> Self {
        let st = 1usize << target;
        let (outer, inner) = match control {
            Some(c) if c > target => (Some(1usize << c), None),
            Some(c) => (None, Some(1usize << c)),
            None => (None, None),
        };
        let block = outer.unwrap_or(0);
        let mut r = Runs {
            len,
            st,
            outer,
            inner,
            block,
            base: block,
            sub: 0,
        };
        if let Some(sc) = inner {
            r.sub = r.base + sc;
        }
        r
    }
}

impl Iterator for Runs {
    type Item = (usize, usize, usize);

    #[inline(always)]
    fn next(&mut self) -> Option<Self::Item> {
        let st = self.st;
        if let Some(sc) = self.inner {
            loop {
                if self.base >= self.len {
                    return None;
                }
                if self.sub < self.base + st {
                    let lo = self.sub;
                    self.sub += sc << 1;
                    return Some((lo, lo + st, sc));
                }
                self.base += st << 1;
                self.sub = self.base + sc;
            }
        }
        if let Some(sc) = self.outer {
            if self.base >= self.block + sc {
                self.block += sc << 1;
                self.base = self.block;
            }
        }
        if self.base >= self.len {
            return None;
        }
        let lo = self.base;
        self.base += st << 1;
        Some((lo, lo + st, st))
    }
}

/// Shortest run [`Runs`] would produce for this gate.
fn run_len(target: usize, control: Option<usize>) -> usize {
    match control {
        Some(c) if c < target => 1 << c,
        _ => 1 << target,
    }
}

#[cfg(test)]
/// Inserts a zero bit at position `bit` of `i`.
#[inline(always)]
fn insert_zero(i: usize, bit: usize) -> usize {
    let low = i & ((1 << bit) - 1);
    ((i >> bit) << (bit + 1)) | low
}

#[cfg(test)]
/// Low index of the `i`-th pair differing in `target` with the control bit
/// set; `count` of [`pair_count`] pairs in total.
#[inline(always)]
fn pair_lo(i: usize, target: usize, control: Option<usize>) -> usize {
    match control {
        None => insert_zero(i, target),
        Some(c) => {
            let (a, b) = if c < target { (c, target) } else { (target, c) };
            insert_zero(insert_zero(i, a), b) | (1 << c)
        }
    }
}

#[cfg(test)]
fn pair_count(len: usize, control: Option<usize>) -> usize {
    if control.is_some() {
        len / 4
    } else {
        len / 2
    }
}

#[inline(always)]
fn split(v: &mut [f64], lo: usize, hi: usize, n: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = v.split_at_mut(hi);
    (&mut a[lo..lo + n], &mut b[..n])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; LANES];
    let (ac, bc) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ac
        .remainder()
        .iter()
        .zip(bc.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ac.zip(bc) {
        for k in 0..LANES {
            lanes[k] += x[k] * y[k];
        }
    }
    lanes.iter().sum::<f64>() + tail
}

/// Real and imaginary parts of the four matrix entries.
#[derive(Clone, Copy)]
struct Split2 {
    r: [[f64; 2]; 2],
    i: [[f64; 2]; 2],
}

impl Split2 {
    fn new(m: &Mat2) -> Self {
        let mut s = Split2 {
            r: [[0.0; 2]; 2],
            i: [[0.0; 2]; 2],
        };
        for a in 0..2 {
            for b in 0..2 {
                s.r[a][b] = m.0[a][b].re;
                s.i[a][b] = m.0[a][b].im;
            }
        }
        s
    }

    /// `M (x, y)` for one amplitude pair given as `(xr, xi, yr, yi)`.
    #[inline(always)]
    fn mul(&self, (xr, xi, yr, yi): (f64, f64, f64, f64)) -> (f64, f64, f64, f64) {
        let ([[r00, r01], [r10, r11]], [[i00, i01], [i10, i11]]) = (self.r, self.i);
        (
            r00 * xr - i00 * xi + r01 * yr - i01 * yi,
            r00 * xi + i00 * xr + r01 * yi + i01 * yr,
            r10 * xr - i10 * xi + r11 * yr - i11 * yi,
            r10 * xi + i10 * xr + r11 * yi + i11 * yr,
        )
    }
}

/// Amplitudes per chunk in the short-run paths (index bits 0..3).
const CHUNK: usize = 8;
const CHUNK_BITS: usize = 3;

/// Stands for "no control inside the chunk" in the const-generic paths.
const NO_CTRL: usize = CHUNK_BITS;

/// One gate sweep over the state. The driver [`drive`] picks the iteration
/// pattern; implementors update amplitude pairs.
trait Sweep {
    /// Pairs `(lo + k, hi + k)` for `k < n`; `n` is a multiple of [`LANES`].
    fn run(&mut self, lo: usize, hi: usize, n: usize);
    /// Chunks `[lo, lo + 8)` and `[hi, hi + 8)` paired lane by lane, for the
    /// lanes with bit `C` set.
    fn lanes<const C: usize>(&mut self, lo: usize, hi: usize);
    /// Pairs inside the chunk at `base` differing in bit `T`, restricted to
    /// bit `C` set unless `C == NO_CTRL`.
    fn in_chunk<const T: usize, const C: usize>(&mut self, base: usize);
}

/// Active `(lo, hi)` lane pairs of a chunk for target bit `T` and in-chunk
/// control `C`; pairs past `count` are unused.
#[inline(always)]
const fn chunk_pairs<const T: usize, const C: usize>() -> ([(usize, usize); 4], usize) {
    let mut out = [(0, 0); 4];
    let mut count = 0;
    let mut lo = 0;
    while lo < CHUNK {
        if lo & (1 << T) == 0 && (C == NO_CTRL || lo & (1 << C) != 0) {
            out[count] = (lo, lo | (1 << T));
            count += 1;
        }
        lo += 1;
    }
    (out, count)
}

/// Lanes of a chunk with bit `C` set.
#[inline(always)]
const fn control_lanes<const C: usize>() -> [usize; 4] {
    let mut out = [0; 4];
    let mut count = 0;
    let mut j = 0;
    while j < CHUNK {
        if j & (1 << C) != 0 {
            out[count] = j;
            count += 1;
        }
        j += 1;
    }
    out
}

/// Whether the short-run chunk paths apply (states smaller than one chunk
/// always take the run path).
#[inline(always)]
fn chunked(len: usize, target: usize, control: Option<usize>) -> bool {
    len >= CHUNK && run_len(target, control) < CHUNK
}

#[inline(always)]
fn drive<S: Sweep>(s: &mut S, len: usize, target: usize, control: Option<usize>) {
    if !chunked(len, target, control) {
        for (lo, hi, n) in Runs::new(len, target, control) {
            s.run(lo, hi, n);
        }
        return;
    }
    if target >= CHUNK_BITS {
        // control inside the chunk, target outside
        macro_rules! lanes {
            ($c:literal) => {
                for (lo, hi, n) in Runs::new(len, target, None) {
                    for k in (0..n).step_by(CHUNK) {
                        s.lanes::<$c>(lo + k, hi + k);
                    }
                }
            };
        }
        match control {
            Some(0) => lanes!(0),
            Some(1) => lanes!(1),
            _ => lanes!(2),
        }
        return;
    }
    let chunk_mask = match control {
        Some(c) if c >= CHUNK_BITS => 1usize << c,
        _ => 0,
    };
    macro_rules! chunks {
        ($t:literal, $c:expr) => {
            for base in (0..len).step_by(CHUNK) {
                if base & chunk_mask == chunk_mask {
                    s.in_chunk::<$t, { $c }>(base);
                }
            }
        };
    }
    let inner = control.filter(|&c| c < CHUNK_BITS);
    match (target, inner) {
        (0, None) => chunks!(0, NO_CTRL),
        (0, Some(1)) => chunks!(0, 1),
        (0, Some(_)) => chunks!(0, 2),
        (1, None) => chunks!(1, NO_CTRL),
        (1, Some(0)) => chunks!(1, 0),
        (1, Some(_)) => chunks!(1, 2),
        (_, None) => chunks!(2, NO_CTRL),
        (_, Some(0)) => chunks!(2, 0),
        (_, Some(_)) => chunks!(2, 1),
    }
}

#[inline(always)]
fn chunk_of(v: &mut [f64], base: usize) -> &mut [f64; CHUNK] {
    (&mut v[base..base + CHUNK])
        .try_into()
        .expect("chunk in range")
}

#[inline(always)]
fn chunk_pair(v: &mut [f64], lo: usize, hi: usize) -> (&mut [f64; CHUNK], &mut [f64; CHUNK]) {
    let (a, b) = split(v, lo, hi, CHUNK);
    (
        a.try_into().expect("chunk in range"),
        b.try_into().expect("chunk in range"),
    )
}

struct ApplySweep<'a> {
    re: &'a mut [f64],
    im: &'a mut [f64],
    m: Split2,
}

impl Sweep for ApplySweep<'_> {
    #[inline(always)]
    fn run(&mut self, lo: usize, hi: usize, n: usize) {
        let (ar, br) = split(self.re, lo, hi, n);
        let (ai, bi) = split(self.im, lo, hi, n);
        for (((a, b), c), d) in ar
            .iter_mut()
            .zip(ai.iter_mut())
            .zip(br.iter_mut())
            .zip(bi.iter_mut())
        {
            (*a, *b, *c, *d) = self.m.mul((*a, *b, *c, *d));
        }
    }

    #[inline(always)]
    fn lanes<const C: usize>(&mut self, lo: usize, hi: usize) {
        let (ar, br) = chunk_pair(self.re, lo, hi);
        let (ai, bi) = chunk_pair(self.im, lo, hi);
        for j in control_lanes::<C>() {
            (ar[j], ai[j], br[j], bi[j]) = self.m.mul((ar[j], ai[j], br[j], bi[j]));
        }
    }

    #[inline(always)]
    fn in_chunk<const T: usize, const C: usize>(&mut self, base: usize) {
        let r = chunk_of(self.re, base);
        let i = chunk_of(self.im, base);
        let (pairs, count) = const { chunk_pairs::<T, C>() };
        for &(lo, hi) in &pairs[..count] {
            (r[lo], i[lo], r[hi], i[hi]) = self.m.mul((r[lo], i[lo], r[hi], i[hi]));
        }
    }
}

struct UnapplySweep<'a> {
    pr: &'a mut [f64],
    pi: &'a mut [f64],
    lr: &'a mut [f64],
    li: &'a mut [f64],
    m: Split2,
    want_cross: bool,
    /// `acc[t][lane]`: lane-wise partial sums of the eight cross terms.
    acc: [[f64; LANES]; 8],
}

type Quad = (f64, f64, f64, f64);

/// Steps one state pair and one co-state pair back through `m`; `lane`
/// picks the accumulator column.
#[inline(always)]
fn step(
    m: &Split2,
    want_cross: bool,
    a: &mut [[f64; LANES]; 8],
    p: Quad,
    l: Quad,
    lane: usize,
) -> (Quad, Quad) {
    let np = m.mul(p);
    if want_cross {
        let (l0r, l0i, l1r, l1i) = l;
        let (p0r, p0i, p1r, p1i) = np;
        a[0][lane] += l0r * p0r + l0i * p0i;
        a[1][lane] += l0r * p0i - l0i * p0r;
        a[2][lane] += l0r * p1r + l0i * p1i;
        a[3][lane] += l0r * p1i - l0i * p1r;
        a[4][lane] += l1r * p0r + l1i * p0i;
        a[5][lane] += l1r * p0i - l1i * p0r;
        a[6][lane] += l1r * p1r + l1i * p1i;
        a[7][lane] += l1r * p1i - l1i * p1r;
    }
    (np, m.mul(l))
}

impl Sweep for UnapplySweep<'_> {
    #[inline(always)]
    fn run(&mut self, lo: usize, hi: usize, n: usize) {
        let (p0r, p1r) = split(self.pr, lo, hi, n);
        let (p0i, p1i) = split(self.pi, lo, hi, n);
        let (l0r, l1r) = split(self.lr, lo, hi, n);
        let (l0i, l1i) = split(self.li, lo, hi, n);
        let m = self.m;
        for (((a, b), c), d) in p0r
            .iter_mut()
            .zip(p0i.iter_mut())
            .zip(p1r.iter_mut())
            .zip(p1i.iter_mut())
        {
            (*a, *b, *c, *d) = m.mul((*a, *b, *c, *d));
        }
        if self.want_cross {
            let a = &mut self.acc;
            // tail first (only short runs on tiny states have one)
            let whole = n - n % LANES;
            for j in whole..n {
                let (x0r, x0i, x1r, x1i) = (p0r[j], p0i[j], p1r[j], p1i[j]);
                let (y0r, y0i, y1r, y1i) = (l0r[j], l0i[j], l1r[j], l1i[j]);
                let lane = j - whole;
                a[0][lane] += y0r * x0r + y0i * x0i;
                a[1][lane] += y0r * x0i - y0i * x0r;
                a[2][lane] += y0r * x1r + y0i * x1i;
                a[3][lane] += y0r * x1i - y0i * x1r;
                a[4][lane] += y1r * x0r + y1i * x0i;
                a[5][lane] += y1r * x0i - y1i * x0r;
                a[6][lane] += y1r * x1r + y1i * x1i;
                a[7][lane] += y1r * x1i - y1i * x1r;
            }
            let (p0r, _) = p0r.as_chunks::<LANES>();
            let (p0i, _) = p0i.as_chunks::<LANES>();
            let (p1r, _) = p1r.as_chunks::<LANES>();
            let (p1i, _) = p1i.as_chunks::<LANES>();
            let (q0r, _) = l0r.as_chunks::<LANES>();
            let (q0i, _) = l0i.as_chunks::<LANES>();
            let (q1r, _) = l1r.as_chunks::<LANES>();
            let (q1i, _) = l1i.as_chunks::<LANES>();
            for k in 0..p0r.len() {
                let (x0r, x0i, x1r, x1i) = (&p0r[k], &p0i[k], &p1r[k], &p1i[k]);
                let (y0r, y0i, y1r, y1i) = (&q0r[k], &q0i[k], &q1r[k], &q1i[k]);
                for j in 0..LANES {
                    a[0][j] += y0r[j] * x0r[j] + y0i[j] * x0i[j];
                    a[1][j] += y0r[j] * x0i[j] - y0i[j] * x0r[j];
                    a[2][j] += y0r[j] * x1r[j] + y0i[j] * x1i[j];
                    a[3][j] += y0r[j] * x1i[j] - y0i[j] * x1r[j];
                    a[4][j] += y1r[j] * x0r[j] + y1i[j] * x0i[j];
                    a[5][j] += y1r[j] * x0i[j] - y1i[j] * x0r[j];
                    a[6][j] += y1r[j] * x1r[j] + y1i[j] * x1i[j];
                    a[7][j] += y1r[j] * x1i[j] - y1i[j] * x1r[j];
                }
            }
        }
        for (((a, b), c), d) in l0r
            .iter_mut()
            .zip(l0i.iter_mut())
            .zip(l1r.iter_mut())
            .zip(l1i.iter_mut())
        {
            (*a, *b, *c, *d) = m.mul((*a, *b, *c, *d));
        }
    }

    #[inline(always)]
    fn lanes<const C: usize>(&mut self, lo: usize, hi: usize) {
        let (p0r, p1r) = chunk_pair(self.pr, lo, hi);
        let (p0i, p1i) = chunk_pair(self.pi, lo, hi);
        let (l0r, l1r) = chunk_pair(self.lr, lo, hi);
        let (l0i, l1i) = chunk_pair(self.li, lo, hi);
        for (n, j) in control_lanes::<C>().into_iter().enumerate() {
            let (np, nl) = step(
                &self.m,
                self.want_cross,
                &mut self.acc,
                (p0r[j], p0i[j], p1r[j], p1i[j]),
                (l0r[j], l0i[j], l1r[j], l1i[j]),
                n,
            );
            (p0r[j], p0i[j], p1r[j], p1i[j]) = np;
            (l0r[j], l0i[j], l1r[j], l1i[j]) = nl;
        }
    }

    #[inline(always)]
    fn in_chunk<const T: usize, const C: usize>(&mut self, base: usize) {
        let pr = chunk_of(self.pr, base);
        let pi = chunk_of(self.pi, base);
        let lr = chunk_of(self.lr, base);
        let li = chunk_of(self.li, base);
        let (pairs, count) = const { chunk_pairs::<T, C>() };
        for (n, &(lo, hi)) in pairs[..count].iter().enumerate() {
            let (np, nl) = step(
                &self.m,
                self.want_cross,
                &mut self.acc,
                (pr[lo], pi[lo], pr[hi], pi[hi]),
                (lr[lo], li[lo], lr[hi], li[hi]),
                n,
            );
            (pr[lo], pi[lo], pr[hi], pi[hi]) = np;
            (lr[lo], li[lo], lr[hi], li[hi]) = nl;
        }
    }
}

/// Lane classes of a chunk under a diagonal gate: 0 untouched, 1 control
/// set and target clear, 2 control and target set. Indexed by
/// [`chunk_class`].
fn diag_classes(target: usize, control: Option<usize>) -> [[u8; CHUNK]; 4] {
    std::array::from_fn(|class| {
        std::array::from_fn(|j| {
            let bit = |q: usize, chunk_bit: usize| {
                if q < CHUNK_BITS {
                    (j >> q) & 1
                } else {
                    chunk_bit
                }
            };
            let t = bit(target, class & 1);
            let on = control.is_none_or(|c| bit(c, class >> 1) == 1);
            match (on, t) {
                (false, _) => 0,
                (true, 0) => 1,
                _ => 2,
            }
        })
    })
}

#[inline(always)]
fn chunk_class(base: usize, target: usize, control: Option<usize>) -> usize {
    let high = |q: usize| if q >= CHUNK_BITS { (base >> q) & 1 } else { 0 };
    high(target) | (control.map_or(0, high) << 1)
}

/// Per-class lane factors `(re, im)` for the diagonal entries `d0`, `d1`.
fn diag_tables(
    target: usize,
    control: Option<usize>,
    d0: C64,
    d1: C64,
) -> [([f64; CHUNK], [f64; CHUNK]); 4] {
    diag_classes(target, control).map(|cl| {
        let f = cl.map(|k| match k {
            0 => C64::new(1.0, 0.0),
            1 => d0,
            _ => d1,
        });
        (f.map(|z| z.re), f.map(|z| z.im))
    })
}

#[inline(always)]
fn scale_chunk(
    r: &mut [f64; CHUNK],
    i: &mut [f64; CHUNK],
    (fr, fi): &([f64; CHUNK], [f64; CHUNK]),
) {
    for j in 0..CHUNK {
        (r[j], i[j]) = (fr[j] * r[j] - fi[j] * i[j], fr[j] * i[j] + fi[j] * r[j]);
    }
}

/// Diagonal gate with short runs, applied elementwise chunk by chunk.
#[inline(always)]
fn apply_diag_chunks(
    re: &mut [f64],
    im: &mut [f64],
    d0: C64,
    d1: C64,
    target: usize,
    control: Option<usize>,
) {
    let tables = diag_tables(target, control, d0, d1);
    for base in (0..re.len()).step_by(CHUNK) {
        let tab = &tables[chunk_class(base, target, control)];
        scale_chunk(chunk_of(re, base), chunk_of(im, base), tab);
    }
}

/// Diagonal counterpart of [`UnapplySweep`]; only `S_00` and `S_11` are
/// accumulated.
#[inline(always)]
fn unapply_diag_chunks(
    psi: &mut SplitState,
    lam: &mut SplitState,
    d0: C64,
    d1: C64,
    target: usize,
    control: Option<usize>,
    acc: &mut [[f64; LANES]; 8],
) {
    let tables = diag_tables(target, control, d0, d1);
    let masks = diag_classes(target, control)
        .map(|cl| (cl.map(|k| f64::from(k == 1)), cl.map(|k| f64::from(k == 2))));
    let len = psi.len();
    for base in (0..len).step_by(CHUNK) {
        let class = chunk_class(base, target, control);
        let (pr, pi) = (chunk_of(&mut psi.re, base), chunk_of(&mut psi.im, base));
        scale_chunk(pr, pi, &tables[class]);
        let (lr, li) = (chunk_of(&mut lam.re, base), chunk_of(&mut lam.im, base));
        let (m0, m1) = &masks[class];
        for j in 0..CHUNK {
            let re = lr[j] * pr[j] + li[j] * pi[j];
            let im = lr[j] * pi[j] - li[j] * pr[j];
            acc[0][j % LANES] += m0[j] * re;
            acc[1][j % LANES] += m0[j] * im;
            acc[6][j % LANES] += m1[j] * re;
            acc[7][j % LANES] += m1[j] * im;
        }
        scale_chunk(lr, li, &tables[class]);
    }
}

#[inline(always)]
fn apply_body(s: &mut SplitState, m: &Mat2, target: usize, control: Option<usize>) {
    let len = s.len();
    let SplitState { re, im } = s;
    if m.is_diagonal() {
        let (d0, d1) = (m.0[0][0], m.0[1][1]);
        if chunked(len, target, control) {
            apply_diag_chunks(re, &mut im[..len], d0, d1, target, control);
            return;
        }
        let skip0 = d0 == C64::new(1.0, 0.0);
        for (lo, hi, n) in Runs::new(len, target, control) {
            let (ar, br) = split(re, lo, hi, n);
            let (ai, bi) = split(im, lo, hi, n);
            if !skip0 {
                for (x, y) in ar.iter_mut().zip(ai.iter_mut()) {
                    (*x, *y) = (d0.re * *x - d0.im * *y, d0.re * *y + d0.im * *x);
                }
            }
            for (x, y) in br.iter_mut().zip(bi.iter_mut()) {
                (*x, *y) = (d1.re * *x - d1.im * *y, d1.re * *y + d1.im * *x);
            }
        }
        return;
    }
    let mut sweep = ApplySweep {
        re,
        im: &mut im[..len],
        m: Split2::new(m),
    };
    drive(&mut sweep, len, target, control);
}

#[inline(always)]
fn unapply_body(
    psi: &mut SplitState,
    lam: &mut SplitState,
    adj: &Mat2,
    target: usize,
    control: Option<usize>,
    want_cross: bool,
    diag_only: bool,
) -> [[C64; 2]; 2] {
    let len = psi.len();
    if diag_only && adj.is_diagonal() && chunked(len, target, control) {
        let mut acc = [[0.0; LANES]; 8];
        unapply_diag_chunks(
            psi,
            lam,
            adj.0[0][0],
            adj.0[1][1],
            target,
            control,
            &mut acc,
        );
        return cross_matrix(&acc);
    }
    let mut sweep = UnapplySweep {
        pr: &mut psi.re[..],
        pi: &mut psi.im[..len],
        lr: &mut lam.re[..len],
        li: &mut lam.im[..len],
        m: Split2::new(adj),
        want_cross,
        acc: [[0.0; LANES]; 8],
    };
    drive(&mut sweep, len, target, control);
    cross_matrix(&sweep.acc)
}

#[allow(clippy::needless_range_loop)]
fn cross_matrix(acc: &[[f64; LANES]; 8]) -> [[C64; 2]; 2] {
    let mut s = [[C64::new(0.0, 0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let j = 2 * (2 * a + b);
            s[a][b] = C64::new(acc[j].iter().sum(), acc[j + 1].iter().sum());
        }
    }
    s
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use super::*;

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn apply(
        s: &mut SplitState,
        m: &Mat2,
        target: usize,
        control: Option<usize>,
    ) {
        apply_body(s, m, target, control)
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn unapply(
        psi: &mut SplitState,
        lam: &mut SplitState,
        adj: &Mat2,
        target: usize,
        control: Option<usize>,
        want_cross: bool,
        diag_only: bool,
    ) -> [[C64; 2]; 2] {
        unapply_body(psi, lam, adj, target, control, want_cross, diag_only)
    }
}

#[cfg(target_arch = "x86_64")]
fn has_avx2() -> bool {
    use std::sync::OnceLock;
    static DETECTED: OnceLock<bool> = OnceLock::new();
    *DETECTED.get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
}

/// Applies `m` to `target`, conditioned on `control` when given.
pub(crate) fn apply(s: &mut SplitState, m: &Mat2, target: usize, control: Option<usize>) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the required CPU features were detected at run time.
        return unsafe { avx2::apply(s, m, target, control) };
    }
    apply_body(s, m, target, control)
}

/// Maps `psi` and `lam` back through a gate (`adj` is its adjoint). When
/// `want_cross` is set, returns `S_ab = sum conj(lam_a) psi_b` between the
/// co-state after the gate and the state before it. `diag_only` promises
/// that only the diagonal of that matrix is needed.
pub(crate) fn unapply_pair(
    psi: &mut SplitState,
    lam: &mut SplitState,
    adj: &Mat2,
    target: usize,
    control: Option<usize>,
    want_cross: bool,
    diag_only: bool,
) -> [[C64; 2]; 2] {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the required CPU features were detected at run time.
        return unsafe { avx2::unapply(psi, lam, adj, target, control, want_cross, diag_only) };
    }
    unapply_body(psi, lam, adj, target, control, want_cross, diag_only)
}
