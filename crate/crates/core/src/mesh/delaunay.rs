//! Incremental (Bowyer–Watson) Delaunay triangulation.
//!
//! Points are snapped to a 2^26 integer lattice over their bounding box so the
//! orientation and in-circle predicates can be evaluated exactly in `i128`.

use std::collections::HashMap;

const GRID_BITS: u32 = 26;
const NONE: usize = usize::MAX;
// vertex at infinity closing the hull with ghost triangles
const INF: usize = usize::MAX - 1;

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    // n[i] is the neighbour across the edge opposite v[i]
    n: [usize; 3],
    alive: bool,
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v.contains(&INF)
    }
}

fn orient(a: [i64; 2], b: [i64; 2], c: [i64; 2]) -> i128 {
    let (abx, aby) = ((b[0] - a[0]) as i128, (b[1] - a[1]) as i128);
    let (acx, acy) = ((c[0] - a[0]) as i128, (c[1] - a[1]) as i128);
    abx * acy - aby * acx
}

/// Positive when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `a, b, c`.
fn incircle(a: [i64; 2], b: [i64; 2], c: [i64; 2], d: [i64; 2]) -> i128 {
    let row = |p: [i64; 2]| {
        let (x, y) = ((p[0] - d[0]) as i128, (p[1] - d[1]) as i128);
        (x, y, x * x + y * y)
    };
    let (ax, ay, al) = row(a);
    let (bx, by, bl) = row(b);
    let (cx, cy, cl) = row(c);
    ax * (by * cl - bl * cy) - ay * (bx * cl - bl * cx) + al * (bx * cy - by * cx)
}

fn dot(a: [i64; 2], b: [i64; 2], c: [i64; 2]) -> i128 {
    (b[0] - a[0]) as i128 * (c[0] - a[0]) as i128 + (b[1] - a[1]) as i128 * (c[1] - a[1]) as i128
}

fn hilbert_index(side: u64, mut x: u64, mut y: u64) -> u64 {
    let mut d = 0;
    let mut s = side / 2;
    while s > 0 {
        let rx = u64::from(x & s > 0);
        let ry = u64::from(y & s > 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = side - 1 - x;
                y = side - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

struct Triangulation {
    coords: Vec<[i64; 2]>,
    tris: Vec<Tri>,
    free: Vec<usize>,
}

impl Triangulation {
    /// Whether inserting `p` destroys triangle `t`.
    fn conflicts(&self, t: usize, p: [i64; 2]) -> bool {
        let v = self.tris[t].v;
        match v.iter().position(|&x| x == INF) {
            None => incircle(self.coords[v[0]], self.coords[v[1]], self.coords[v[2]], p) > 0,
            Some(k) => {
                let u = self.coords[v[(k + 1) % 3]];
                let w = self.coords[v[(k + 2) % 3]];
                let o = orient(u, w, p);
                o > 0 || (o == 0 && dot(u, w, p) > 0 && dot(w, u, p) > 0)
            }
        }
    }

    fn add(&mut self, t: Tri) -> usize {
        if let Some(f) = self.free.pop() {
            self.tris[f] = t;
            f
        } else {
            self.tris.push(t);
            self.tris.len() - 1
        }
    }

    fn locate(&self, start: usize, p: [i64; 2]) -> usize {
        let mut t = start;
        if let Some(k) = self.tris[t].v.iter().position(|&x| x == INF) {
            t = self.tris[t].n[k];
        }
        let mut step = 0usize;
        'walk: loop {
            let tri = self.tris[t];
            if tri.is_ghost() {
                return t;
            }
            step += 1;
            for k in 0..3 {
                let i = (k + step) % 3;
                let a = self.coords[tri.v[(i + 1) % 3]];
                let b = self.coords[tri.v[(i + 2) % 3]];
                if orient(a, b, p) < 0 {
                    t = tri.n[i];
                    continue 'walk;
                }
            }
            return t;
        }
    }
}

/// Delaunay triangles (counter-clockwise index triples into `points`).
///
/// Points that coincide after snapping are inserted once; the later copies
/// appear in no triangle. Fully collinear input yields no triangles.
pub fn triangulate(points: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let r = (1i64 << GRID_BITS) as f64;
    let coords: Vec<[i64; 2]> =
        points.iter().map(|p| [((p[0] - lo[0]) / span * r).round() as i64, ((p[1] - lo[1]) / span * r).round() as i64]).collect();

    let mut order: Vec<usize> = (0..n).collect();
    let shift = GRID_BITS - 16;
    let key: Vec<u64> = coords.iter().map(|c| hilbert_index(1 << 16, ((c[0] >> shift) as u64).min(0xffff), ((c[1] >> shift) as u64).min(0xffff))).collect();
    order.sort_by_key(|&i| (key[i], i));

    // seed triangle from the first three non-collinear points
    let a = order[0];
    let Some(b) = order.iter().copied().find(|&i| coords[i] != coords[a]) else {
        return Vec::new();
    };
    let Some(c) = order.iter().copied().find(|&i| orient(coords[a], coords[b], coords[i]) != 0) else {
        return Vec::new();
    };
    let (b, c) = if orient(coords[a], coords[b], coords[c]) > 0 { (b, c) } else { (c, b) };
    let mut tr = Triangulation { coords, tris: Vec::new(), free: Vec::new() };
    // real triangle 0 and ghosts across its edges
    tr.tris.push(Tri { v: [a, b, c], n: [2, 3, 1], alive: true });
    tr.tris.push(Tri { v: [b, a, INF], n: [3, 2, 0], alive: true });
    tr.tris.push(Tri { v: [c, b, INF], n: [1, 3, 0], alive: true });
    tr.tris.push(Tri { v: [a, c, INF], n: [2, 1, 0], alive: true });

    let mut seen: HashMap<[i64; 2], usize> = HashMap::with_capacity(n);
    for i in [a, b, c] {
        seen.insert(tr.coords[i], i);
    }
    let mut last = 0usize;
    let mut in_cavity: Vec<bool> = vec![false; 4];
    let mut cavity: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut rim: Vec<(usize, usize, usize)> = Vec::new();
    let mut created: Vec<usize> = Vec::new();

    for &pi in &order {
        let p = tr.coords[pi];
        if seen.insert(p, pi).is_some() {
            continue;
        }
        let t = tr.locate(last, p);

        cavity.clear();
        stack.clear();
        stack.push(t);
        in_cavity[t] = true;
        while let Some(x) = stack.pop() {
            cavity.push(x);
            for &nb in &tr.tris[x].n {
                if !in_cavity[nb] && tr.conflicts(nb, p) {
                    in_cavity[nb] = true;
                    stack.push(nb);
                }
            }
        }

        rim.clear();
        for &x in &cavity {
            let tri = tr.tris[x];
            for i in 0..3 {
                if !in_cavity[tri.n[i]] {
                    rim.push((tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], tri.n[i]));
                }
            }
        }
        for &x in &cavity {
            tr.tris[x].alive = false;
            in_cavity[x] = false;
            tr.free.push(x);
        }

        created.clear();
        for &(u, w, outer) in &rim {
            let idx = tr.add(Tri { v: [u, w, pi], n: [NONE, NONE, outer], alive: true });
            if idx >= in_cavity.len() {
                in_cavity.push(false);
            }
            let o = &mut tr.tris[outer];
            for i in 0..3 {
                if o.v[(i + 1) % 3] == w && o.v[(i + 2) % 3] == u {
                    o.n[i] = idx;
                }
            }
            created.push(idx);
        }
        // fan around p: edge (w, p) of (u, w, p) is shared with (w, *, p)
        for &x in &created {
            let [u, w, _] = tr.tris[x].v;
            for &y in &created {
                let vy = tr.tris[y].v;
                if vy[0] == w {
                    tr.tris[x].n[0] = y;
                }
                if vy[1] == u {
                    tr.tris[x].n[1] = y;
                }
            }
        }
        last = created.iter().copied().find(|&x| !tr.tris[x].is_ghost()).unwrap_or(created[0]);
    }

    tr.tris.iter().filter(|t| t.alive && !t.is_ghost()).map(|t| t.v).collect()
}
