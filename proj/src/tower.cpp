#include "openmap/tower.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace openmap {

// ---------------------------------------------------------------- cover

std::pair<double, double> ReferenceCover::tile(std::uint64_t idx) const {
    for (auto& s : segments)
        if (idx >= s.tile0 && idx < s.tile0 + s.count) {
            const std::uint64_t j = idx - s.tile0;
            return {s.lo + s.width * double(j), s.lo + s.width * double(j + 1)};
        }
    throw std::out_of_range("ReferenceCover::tile: index out of range");
}

bool ReferenceCover::covered_range(double A, double B, std::uint64_t& first,
                                   std::uint64_t& last) const {
    const double tol = 1e-12 * (1.0 + std::fabs(A) + std::fabs(B));
    bool found = false;
    std::uint64_t best_first = 0, best_last = 0;
    std::uint64_t cur_first = 0, cur_last = 0;
    bool open = false;
    for (auto& s : segments) {
        if (s.hi <= A || s.lo >= B) continue;
        // local tile range fully inside [A,B]
        double i1f = std::ceil((A - s.lo) / s.width - tol / s.width);
        double i2f = std::floor((B - s.lo) / s.width + tol / s.width) - 1.0;
        std::int64_t i1 = std::max<std::int64_t>(0, std::int64_t(i1f));
        std::int64_t i2 = std::min<std::int64_t>(std::int64_t(s.count) - 1, std::int64_t(i2f));
        if (i1 > i2) continue;
        const std::uint64_t g1 = s.tile0 + std::uint64_t(i1);
        const std::uint64_t g2 = s.tile0 + std::uint64_t(i2);
        if (open && g1 == cur_last + 1) {
            cur_last = g2;
        } else {
            if (open && (!found || cur_last - cur_first > best_last - best_first)) {
                best_first = cur_first;
                best_last = cur_last;
                found = true;
            }
            cur_first = g1;
            cur_last = g2;
            open = true;
        }
    }
    if (open && (!found || cur_last - cur_first > best_last - best_first)) {
        best_first = cur_first;
        best_last = cur_last;
        found = true;
    }
    first = best_first;
    last = best_last;
    return found;
}

ReferenceCover build_reference_cover(const QuadMap& map, const OpenIntervalSet& hole,
                                     double delta, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("build_reference_cover: eps <= 0");
    ReferenceCover cover;
    cover.eps = eps;
    cover.delta = delta;

    // walk [1-a,1] excluding hole interiors, splitting at -delta, 0, delta
    std::vector<double> splits = {-delta, 0.0, delta};
    std::vector<std::pair<double, double>> raw;
    double cursor = map.range_lo();
    for (auto& [l, r] : hole.comp) {
        if (r <= map.range_lo() || l >= map.range_hi()) continue;
        if (l > cursor) raw.push_back({cursor, std::min(l, map.range_hi())});
        cursor = std::max(cursor, r);
    }
    if (cursor < map.range_hi()) raw.push_back({cursor, map.range_hi()});

    std::uint64_t next_tile = 0;
    for (auto& [lo0, hi0] : raw) {
        std::vector<double> bounds = {lo0, hi0};
        for (double s : splits)
            if (s > lo0 && s < hi0) bounds.push_back(s);
        std::sort(bounds.begin(), bounds.end());
        for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
            const double lo = bounds[i], hi = bounds[i + 1];
            const double L = hi - lo;
            if (L <= 0.0) continue;
            if (L < eps)
                throw std::runtime_error(
                    "build_reference_cover: a maximal subinterval is shorter than eps");
            ReferenceCover::Segment seg;
            seg.lo = lo;
            seg.hi = hi;
            seg.count = std::uint64_t(std::max(1.0, std::ceil(L / (2.0 * eps))));
            seg.width = L / double(seg.count);
            seg.tile0 = next_tile;
            next_tile += seg.count;
            cover.segments.push_back(seg);
        }
    }
    cover.total_tiles = next_tile;
    return cover;
}

std::vector<std::uint64_t> sample_seed_tiles(const ReferenceCover& cover,
                                             std::size_t count) {
    std::vector<std::uint64_t> out;
    if (cover.total_tiles == 0) return out;
    count = std::min<std::size_t>(count, cover.total_tiles);
    for (std::size_t j = 0; j < count; ++j) {
        const std::uint64_t idx =
            std::uint64_t((double(j) + 0.5) / double(count) * double(cover.total_tiles));
        out.push_back(std::min(idx, cover.total_tiles - 1));
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------- engine

namespace {

constexpr double kDerivFloor = 1e-300;

double log_interp(double xa, double ya, double xb, double yb, double x) {
    ya = std::max(ya, kDerivFloor);
    yb = std::max(yb, kDerivFloor);
    if (xb == xa) return ya;
    const double t = (x - xa) / (xb - xa);
    return std::exp(std::log(ya) + t * (std::log(yb) - std::log(ya)));
}

struct Piece {
    double seed_lo, seed_hi;
    double img_at_lo, img_at_hi;  // T^{n-t0} of the seed endpoints
    double d_at_lo, d_at_hi;      // within-run derivative products
    double chain_d_lo, chain_d_hi;  // prefactor |(T^{t0})'| at seed endpoints
    int n = 0;
    int deadline = 0;  // bound iff n < deadline
    int t_entry = -1;
    int k_cell = 0;
    bool created_by_cell_cut = false;
    int sibling = -1;
    signed char sib_on_hi = 0;
    std::vector<std::pair<int, int>> itin;
    int span = -1;
    bool alive = true;

    double img_lo() const { return std::min(img_at_lo, img_at_hi); }
    double img_hi() const { return std::max(img_at_lo, img_at_hi); }
    double img_len() const { return img_hi() - img_lo(); }
    double width() const { return seed_hi - seed_lo; }
};

struct PendingJob {
    double lo = 0, hi = 0;
    int t0 = 0;
    double mass = 0;
    double chain_d_lo = 1, chain_d_hi = 1;
    std::vector<int> chain;
    std::vector<std::pair<int, int>> itin;
    int parent_span = -1;
    double frac_lo = 0, frac_hi = 1;
    int round = 0;
};

struct RunCtx {
    const QuadMap* map;
    const OpenIntervalSet* hole;
    const ReferenceCover* cover;
    const NeighborhoodPartition* part;
    const BoundRecoveryTables* tables;
    const TowerParams* par;
    TowerModel* tower;
    int seed_index = -1;
    // current run
    double run_lo = 0, run_hi = 0;
    int t0 = 0;
    double mpl = 0;  // mass per unit seed length
    double chain_d_lo = 1, chain_d_hi = 1;
    std::vector<int> chain;
    std::vector<Piece> arena;
    std::vector<PendingJob>* jobs = nullptr;

    double piece_mass(const Piece& p) const { return p.width() * mpl; }

    double chain_d_at(double s) const {
        return log_interp(run_lo, chain_d_lo, run_hi, chain_d_hi, s);
    }

    // monotone preimage of image value c inside [a,b] under T^steps; targets
    // outside the endpoint images clamp to the matching endpoint
    double preimage(double a, double b, double fa, int steps, double c) const {
        if (steps == 0) return std::min(std::max(c, a), b);
        double fb = b;
        for (int s = 0; s < steps; ++s) fb = map->step(fb);
        const bool rising = fa < fb;
        if (c <= std::min(fa, fb)) return rising ? a : b;
        if (c >= std::max(fa, fb)) return rising ? b : a;
        for (int it = 0; it < 200; ++it) {
            const double m = 0.5 * (a + b);
            if (m <= a || m >= b) break;
            double y = m;
            for (int s = 0; s < steps; ++s) y = map->step(y);
            if ((y < c) == rising)
                a = m;
            else
                b = m;
            if (b - a <= 1e-16 * (1.0 + std::fabs(a))) break;
        }
        return 0.5 * (a + b);
    }

    int new_span(int seed, int birth, double mass, int parent, double frac_lo,
                 double frac_hi, const std::vector<std::pair<int, int>>& itin,
                 char origin) {
        PieceSpan s;
        s.seed = seed;
        s.birth = birth;
        s.death = birth;
        s.mass = mass;
        s.parent = parent;
        s.frac_lo = frac_lo;
        s.frac_hi = frac_hi;
        s.itin = itin;
        s.origin = origin;
        tower->spans.push_back(std::move(s));
        const int id = int(tower->spans.size()) - 1;
        if (parent >= 0) tower->spans[std::size_t(parent)].children.push_back(id);
        return id;
    }

    void record_traj(Piece& p) {
        auto& sp = tower->spans[std::size_t(p.span)];
        sp.traj.push_back({p.img_at_lo, p.img_at_hi,
                           std::max(kDerivFloor, p.d_at_lo * p.chain_d_lo),
                           std::max(kDerivFloor, p.d_at_hi * p.chain_d_hi)});
        sp.death = p.n + 1;  // alive through the current level
    }

    void kill_span(const Piece& p, char kind, int cell_idx = -1) {
        auto& sp = tower->spans[std::size_t(p.span)];
        sp.death_kind = kind;
        sp.death = p.n;  // overwritten meaning: see below
        if (cell_idx >= 0) sp.cell = cell_idx;
    }
};

// ---- span death convention -------------------------------------------
// record_traj keeps death = n+1 while alive (levels birth..n inclusive).
// When a piece dies AT time n (its image at n was dispatched into cells,
// children or residuals), the span stays alive at level n only if the death
// event is a cut (children exist at the same level).  For stops (grown /
// hole / residual) the level-n row was already recorded before dispatch, and
// the mass leaves the column after level n-1 for returns at n.  To keep the
// accounting simple and conservative we treat all spans as occupying levels
// [birth, death_time) where death_time is the time of the dispatch event,
// and hole cells are booked at their own level R.  The record_traj call for
// the dispatch level is therefore rolled back on death.

void rollback_traj(RunCtx& ctx, Piece& p) {
    auto& sp = ctx.tower->spans[std::size_t(p.span)];
    if (!sp.traj.empty()) sp.traj.pop_back();
    sp.death = p.n;
}

struct ChildRange {
    double img_a, img_b;  // sub-range of the parent image (ascending)
    enum class Kind { Free, Ladder, Core, Hole, Grown } kind;
    int k = 0;          // signed ladder index (merged +-k0 included)
    int hole_comp = -1;
};

// classify a sub-range of an image against the joined partition
ChildRange classify_range(const RunCtx& ctx, double a, double b) {
    ChildRange r;
    r.img_a = a;
    r.img_b = b;
    const double mid = 0.5 * (a + b);
    const int hc = ctx.hole->component_of(mid);
    if (hc >= 0) {
        r.kind = ChildRange::Kind::Hole;
        r.hole_comp = hc;
        return r;
    }
    const auto& part = *ctx.part;
    if (a < part.delta && b > part.delta) {
        r.kind = ChildRange::Kind::Ladder;
        r.k = part.k0;
        return r;
    }
    if (a < -part.delta && b > -part.delta) {
        r.kind = ChildRange::Kind::Ladder;
        r.k = -part.k0;
        return r;
    }
    auto c = part.classify(mid);
    switch (c.region) {
        case NeighborhoodPartition::Region::Outside:
            r.kind = ChildRange::Kind::Free;
            break;
        case NeighborhoodPartition::Region::Core:
            r.kind = ChildRange::Kind::Core;
            break;
        case NeighborhoodPartition::Region::Cell:
            r.kind = ChildRange::Kind::Ladder;
            r.k = c.k;
            break;
    }
    return r;
}

// cut values of the joined partition strictly inside (A,B): hole endpoints
// plus the +-e^{-k} ladder (k0 < k <= kmax+1).  +-delta itself is skipped
// when the outside part is short, so that sliver is appended to the
// I_{+-k0} piece; an outside part longer than half the I_{k0} cell would
// not stay negligible through the q(k0) bound period at this scale, so the
// cut at +-delta is introduced instead.
std::vector<double> qcut_values(const RunCtx& ctx, double A, double B) {
    std::vector<double> vals;
    for (auto& [l, r] : ctx.hole->comp) {
        if (l > A && l < B) vals.push_back(l);
        if (r > A && r < B) vals.push_back(r);
    }
    // critical preimages +-sqrt(1/a): cutting here at time n equals the cut
    // at the 0-boundary of the partition at time n+1 and keeps the endpoint
    // representation of every piece fold-free
    if (ctx.map->a > 0.25) {
        const double cp = std::sqrt(1.0 / ctx.map->a);
        if (cp > A && cp < B) vals.push_back(cp);
        if (-cp > A && -cp < B) vals.push_back(-cp);
    }
    const auto& part = *ctx.part;
    const double append_max =
        0.5 * (part.delta - part.cell_inner(part.k0));  // half of |I_{k0}|
    if (A < part.delta && B > part.core_bound) {
        for (int k = part.k0 + 1; k <= part.kmax + 1; ++k) {
            const double v = std::exp(-double(k));
            if (v > A && v < B) vals.push_back(v);
        }
        if (part.delta > A && part.delta < B && B - part.delta > append_max)
            vals.push_back(part.delta);
    }
    if (A < -part.core_bound && B > -part.delta) {
        for (int k = part.k0 + 1; k <= part.kmax + 1; ++k) {
            const double v = -std::exp(-double(k));
            if (v > A && v < B) vals.push_back(v);
        }
        if (-part.delta > A && -part.delta < B && -part.delta - A > append_max)
            vals.push_back(-part.delta);
    }
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    return vals;
}

void stop_cell(RunCtx& ctx, Piece& p, double seed_a, double seed_b, double img_a,
               double img_b, double d_seed_a, double d_seed_b, bool fell,
               int hole_comp, bool adjoin_flag) {
    StoppedCell cell;
    cell.seed_lo = seed_a;
    cell.seed_hi = seed_b;
    cell.run_lo = ctx.run_lo;
    cell.run_hi = ctx.run_hi;
    cell.seg_t0 = ctx.t0;
    cell.s_abs = p.n;
    cell.s_rel = p.n - ctx.t0;
    cell.fell = fell;
    cell.hole_component = hole_comp;
    cell.img_lo = img_a;
    cell.img_hi = img_b;
    cell.mass = (seed_b - seed_a) * ctx.mpl;
    cell.d_lo = d_seed_a;
    cell.d_hi = d_seed_b;
    cell.chain_d_lo = ctx.chain_d_at(seed_a);
    cell.chain_d_hi = ctx.chain_d_at(seed_b);
    cell.chain = ctx.chain;
    cell.chain.push_back(p.n);
    cell.itin = p.itin;
    cell.span = p.span;
    cell.adjoin_flagged = adjoin_flag;
    ctx.tower->cells.push_back(std::move(cell));
    const int ci = int(ctx.tower->cells.size()) - 1;
    if (fell) {
        HoleCell h;
        h.R = p.n;
        h.mass = ctx.tower->cells.back().mass;
        h.component = hole_comp;
        h.cell = ci;
        h.seed = ctx.seed_index;
        h.span = p.span;
        ctx.tower->holes.push_back(h);
    }
    auto& sp = ctx.tower->spans[std::size_t(p.span)];
    if (sp.cell < 0) sp.cell = ci;
}

void add_residual(RunCtx& ctx, Residual::Kind kind, double mass, int time) {
    Residual r;
    r.kind = kind;
    r.mass = mass;
    r.time = time;
    r.seed = ctx.seed_index;
    ctx.tower->residuals.push_back(r);
}

// Cut a piece at the given ascending image values and dispatch every
// sub-range.  Ranges whose kind is Hole or Grown stop; Core and floor-width
// ranges freeze as residuals; the rest become child pieces.
void cut_and_dispatch(RunCtx& ctx, int pi, const std::vector<double>& vals,
                      bool allow_grown, bool adjoin_flag, char origin = 'c') {
    Piece p = ctx.arena[std::size_t(pi)];  // copy: arena may reallocate
    const int steps = p.n - ctx.t0;
    const bool rising = p.img_at_lo < p.img_at_hi;
    const double G = ctx.par->grown_stop();

    // seed-coordinate preimages of the cut values with exact derivative
    // products (the log-linear model is unusable across critical passages)
    auto dprod_at = [&](double s) {
        double d = 1.0, x = s;
        for (int j = 0; j < steps; ++j) {
            d *= std::fabs(ctx.map->deriv(x));
            x = ctx.map->step(x);
        }
        return std::max(d, kDerivFloor);
    };
    std::vector<double> seed_cuts(vals.size()), d_cuts(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        seed_cuts[i] = ctx.preimage(p.seed_lo, p.seed_hi, p.img_at_lo, steps,
                                    vals[std::size_t(rising ? i : vals.size() - 1 - i)]);
        d_cuts[i] = 0.0;  // filled after sorting
    }
    std::sort(seed_cuts.begin(), seed_cuts.end());
    for (std::size_t i = 0; i < seed_cuts.size(); ++i) d_cuts[i] = dprod_at(seed_cuts[i]);

    // ranges in ascending image order with matched seed order; d values are
    // attached to the seed-side endpoints
    struct Sub {
        double img_a, img_b, seed_a, seed_b, d_seed_a, d_seed_b;
    };
    std::vector<Sub> subs;
    const double A = p.img_lo(), B = p.img_hi();
    double prev_img = A;
    for (std::size_t i = 0; i <= vals.size(); ++i) {
        const double img_b = i < vals.size() ? vals[i] : B;
        Sub s;
        s.img_a = prev_img;
        s.img_b = img_b;
        if (rising) {
            const bool first = i == 0, last = i == vals.size();
            s.seed_a = first ? p.seed_lo : seed_cuts[i - 1];
            s.seed_b = last ? p.seed_hi : seed_cuts[i];
            s.d_seed_a = first ? p.d_at_lo : d_cuts[i - 1];
            s.d_seed_b = last ? p.d_at_hi : d_cuts[i];
        } else {
            const bool first = i == 0, last = i == vals.size();
            s.seed_a = last ? p.seed_lo : seed_cuts[vals.size() - 1 - i];
            s.seed_b = first ? p.seed_hi : seed_cuts[vals.size() - i];
            s.d_seed_a = last ? p.d_at_lo : d_cuts[vals.size() - 1 - i];
            s.d_seed_b = first ? p.d_at_hi : d_cuts[vals.size() - i];
        }
        subs.push_back(s);
        prev_img = img_b;
    }

    ctx.arena[std::size_t(pi)].alive = false;
    rollback_traj(ctx, ctx.arena[std::size_t(pi)]);
    ctx.kill_span(ctx.arena[std::size_t(pi)], 'c');

    // create children / cells; link ladder siblings afterwards
    std::vector<int> child_of_sub(subs.size(), -1);
    std::vector<ChildRange> cls(subs.size());
    bool any_child = false, any_cell = false;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        auto& s = subs[i];
        cls[i] = classify_range(ctx, s.img_a, s.img_b);
        const double frac_a = (s.img_a - A) / std::max(B - A, 1e-300);
        const double frac_b = (s.img_b - A) / std::max(B - A, 1e-300);
        if (cls[i].kind == ChildRange::Kind::Hole) {
            // temporary piece view for stop_cell bookkeeping
            Piece v = p;
            v.span = ctx.new_span(ctx.seed_index, p.n, (s.seed_b - s.seed_a) * ctx.mpl,
                                  p.span, frac_a, frac_b, p.itin, origin);
            ctx.tower->spans[std::size_t(v.span)].death_kind = 'h';
            stop_cell(ctx, v, s.seed_a, s.seed_b, s.img_a, s.img_b, s.d_seed_a,
                      s.d_seed_b, true, cls[i].hole_comp, adjoin_flag);
            any_cell = true;
            continue;
        }
        if (allow_grown && s.img_b - s.img_a >= G) {
            Piece v = p;
            v.span = ctx.new_span(ctx.seed_index, p.n, (s.seed_b - s.seed_a) * ctx.mpl,
                                  p.span, frac_a, frac_b, p.itin, origin);
            ctx.tower->spans[std::size_t(v.span)].death_kind = 'g';
            stop_cell(ctx, v, s.seed_a, s.seed_b, s.img_a, s.img_b, s.d_seed_a,
                      s.d_seed_b, false, -1, adjoin_flag);
            any_cell = true;
            continue;
        }
        if (cls[i].kind == ChildRange::Kind::Core) {
            add_residual(ctx, Residual::Kind::Core, (s.seed_b - s.seed_a) * ctx.mpl,
                         p.n);
            continue;
        }
        if (s.seed_b - s.seed_a < ctx.par->effective_width_floor()) {
            add_residual(ctx, Residual::Kind::Degenerate,
                         (s.seed_b - s.seed_a) * ctx.mpl, p.n);
            continue;
        }
        Piece c;
        c.seed_lo = s.seed_a;
        c.seed_hi = s.seed_b;
        c.img_at_lo = rising ? s.img_a : s.img_b;
        c.img_at_hi = rising ? s.img_b : s.img_a;
        c.d_at_lo = s.d_seed_a;
        c.d_at_hi = s.d_seed_b;
        c.chain_d_lo = ctx.chain_d_at(s.seed_a);
        c.chain_d_hi = ctx.chain_d_at(s.seed_b);
        c.n = p.n;
        c.itin = p.itin;
        c.deadline = p.n;  // free unless bound below
        c.t_entry = p.t_entry;
        c.k_cell = p.k_cell;
        if (cls[i].kind == ChildRange::Kind::Ladder) {
            c.t_entry = p.n;
            c.k_cell = cls[i].k;
            c.deadline = p.n + ctx.tables->q_of(cls[i].k);
            c.itin.push_back({p.n, cls[i].k});
        }
        c.span = ctx.new_span(ctx.seed_index, p.n, (s.seed_b - s.seed_a) * ctx.mpl,
                              p.span, frac_a, frac_b, c.itin, origin);
        ctx.arena.push_back(c);
        ctx.record_traj(ctx.arena.back());
        child_of_sub[i] = int(ctx.arena.size()) - 1;
        any_child = true;
    }
    (void)any_child;
    (void)any_cell;

    // sibling links between adjacent ladder children (shallow -> deeper)
    for (std::size_t i = 0; i + 1 < subs.size(); ++i) {
        const int ca = child_of_sub[i], cb = child_of_sub[i + 1];
        if (ca < 0 || cb < 0) continue;
        if (cls[i].kind != ChildRange::Kind::Ladder ||
            cls[i + 1].kind != ChildRange::Kind::Ladder)
            continue;
        Piece& pa = ctx.arena[std::size_t(ca)];
        Piece& pb = ctx.arena[std::size_t(cb)];
        if (std::abs(pa.k_cell) == std::abs(pb.k_cell)) continue;
        Piece& shallow = std::abs(pa.k_cell) < std::abs(pb.k_cell) ? pa : pb;
        Piece& deep = std::abs(pa.k_cell) < std::abs(pb.k_cell) ? pb : pa;
        shallow.created_by_cell_cut = true;
        shallow.sibling = std::abs(pa.k_cell) < std::abs(pb.k_cell) ? cb : ca;
        shallow.sib_on_hi = deep.seed_lo >= shallow.seed_hi ? 1 : -1;
    }
}

void dispatch_free(RunCtx& ctx, int pi) {
    Piece& p = ctx.arena[std::size_t(pi)];
    const double A = p.img_lo(), B = p.img_hi();
    const double G = ctx.par->grown_stop();

    // hole endpoints inside the image
    std::vector<double> hole_cuts;
    bool touches_hole = ctx.hole->component_of(0.5 * (A + B)) >= 0;
    for (auto& [l, r] : ctx.hole->comp) {
        if (l > A && l < B) {
            hole_cuts.push_back(l);
            touches_hole = true;
        }
        if (r > A && r < B) {
            hole_cuts.push_back(r);
            touches_hole = true;
        }
    }

    if (!touches_hole) {
        if (B - A >= G) {
            rollback_traj(ctx, p);
            ctx.kill_span(p, 'g');
            p.alive = false;
            stop_cell(ctx, p, p.seed_lo, p.seed_hi, A, B, p.d_at_lo, p.d_at_hi,
                      false, -1, false);
            return;
        }
        auto vals = qcut_values(ctx, A, B);
        ChildRange whole = classify_range(ctx, A, B);
        if (vals.empty() && whole.kind == ChildRange::Kind::Free)
            return;  // single free cell: nothing to cut, no state change
        cut_and_dispatch(ctx, pi, vals, false, false);
        return;
    }

    // capture: split at hole endpoints plus the partition values of the
    // surviving parts, then dispatch everything in one pass
    std::vector<double> vals = hole_cuts;
    std::sort(vals.begin(), vals.end());
    std::vector<double> all_vals = vals;
    double prev = A;
    for (std::size_t i = 0; i <= vals.size(); ++i) {
        const double b = i < vals.size() ? vals[i] : B;
        if (b > prev && ctx.hole->component_of(0.5 * (prev + b)) < 0 && b - prev < G) {
            auto qs = qcut_values(ctx, prev, b);
            all_vals.insert(all_vals.end(), qs.begin(), qs.end());
        }
        prev = b;
    }
    std::sort(all_vals.begin(), all_vals.end());
    all_vals.erase(std::unique(all_vals.begin(), all_vals.end()), all_vals.end());
    cut_and_dispatch(ctx, pi, all_vals, true, false, 'H');
}

void dispatch_deadline(RunCtx& ctx, int pi) {
    Piece& p = ctx.arena[std::size_t(pi)];
    const double A = p.img_lo(), B = p.img_hi();
    const double G = ctx.par->grown_stop();
    if (B - A < G) return;  // keep iterating; free from the next step on

    // capture-first resolution of the q-deadline stop
    bool captured = false;
    for (auto& [l, r] : ctx.hole->comp)
        if ((l > A && l < B) || (r > A && r < B)) captured = true;

    // adjoin rule (Case 2): the piece was created at its bound entry by a
    // cut between I_k and I_{k+1}; the sliver that does not cover the last
    // reference tile on the sibling side is appended to the sibling.
    const bool sib_ok = p.created_by_cell_cut && p.sibling >= 0 &&
                        p.sibling < int(ctx.arena.size()) &&
                        ctx.arena[std::size_t(p.sibling)].alive && !captured;
    if (!sib_ok) {
        // Case 1 (or flagged Case-2 degradation): stop, with capture cuts;
        // surviving parts below the growth threshold are refined in place
        std::vector<double> vals;
        for (auto& [l, r] : ctx.hole->comp) {
            if (l > A && l < B) vals.push_back(l);
            if (r > A && r < B) vals.push_back(r);
        }
        std::sort(vals.begin(), vals.end());
        std::vector<double> all_vals = vals;
        double prev = A;
        for (std::size_t i = 0; i <= vals.size(); ++i) {
            const double b = i < vals.size() ? vals[i] : B;
            if (b > prev && ctx.hole->component_of(0.5 * (prev + b)) < 0 &&
                b - prev < G) {
                auto qs = qcut_values(ctx, prev, b);
                all_vals.insert(all_vals.end(), qs.begin(), qs.end());
            }
            prev = b;
        }
        std::sort(all_vals.begin(), all_vals.end());
        all_vals.erase(std::unique(all_vals.begin(), all_vals.end()), all_vals.end());
        cut_and_dispatch(ctx, pi, all_vals, true,
                         p.created_by_cell_cut || captured,
                         captured ? 'H' : 'c');
        return;
    }

    const bool rising = p.img_at_lo < p.img_at_hi;
    const bool sib_at_img_hi = (p.sib_on_hi > 0) == rising;
    const double sib_end = sib_at_img_hi ? B : A;

    std::uint64_t fi = 0, li = 0;
    if (!ctx.cover->covered_range(A, B, fi, li)) {
        cut_and_dispatch(ctx, pi, {}, true, true);
        return;
    }
    const double c = sib_at_img_hi ? ctx.cover->tile(li).second
                                   : ctx.cover->tile(fi).first;
    const double sliver = std::fabs(sib_end - c);
    if (sliver <= 1e-13 || (sib_at_img_hi ? c <= A : c >= B)) {
        cut_and_dispatch(ctx, pi, {}, true, true);  // nothing to adjoin
        return;
    }

    // split at c: the main part stops grown with its image end exactly at a
    // tile edge; the sliver extends the sibling
    const int steps = p.n - ctx.t0;
    const double pre_c = ctx.preimage(p.seed_lo, p.seed_hi, p.img_at_lo, steps, c);
    double d_c = 1.0;
    {
        double x = pre_c;
        for (int s = 0; s < steps; ++s) {
            d_c *= std::fabs(ctx.map->deriv(x));
            x = ctx.map->step(x);
        }
        d_c = std::max(d_c, kDerivFloor);
    }

    Piece& sib = ctx.arena[std::size_t(p.sibling)];
    const double sliver_mass =
        (p.sib_on_hi > 0 ? p.seed_hi - pre_c : pre_c - p.seed_lo) * ctx.mpl;

    // span split of the sibling so level masses stay a partition
    auto& old_span = ctx.tower->spans[std::size_t(sib.span)];
    old_span.death = p.n;
    old_span.death_kind = 'A';
    const int ns = ctx.new_span(ctx.seed_index, p.n,
                                ctx.piece_mass(sib) + sliver_mass, sib.span, 0.0,
                                1.0, sib.itin, 'a');
    sib.span = ns;

    if (p.sib_on_hi > 0) {
        sib.seed_lo = pre_c;  // sibling sits beyond seed_hi: extend its low end
        if (sib.seed_lo > sib.seed_hi) std::swap(sib.seed_lo, sib.seed_hi);
        sib.img_at_lo = c;
        sib.d_at_lo = d_c;  // within-run derivative of the adjoined endpoint
        sib.chain_d_lo = ctx.chain_d_at(pre_c);
    } else {
        sib.seed_hi = pre_c;
        if (sib.seed_lo > sib.seed_hi) std::swap(sib.seed_lo, sib.seed_hi);
        sib.img_at_hi = c;
        sib.d_at_hi = d_c;
        sib.chain_d_hi = ctx.chain_d_at(pre_c);
    }
    ctx.record_traj(sib);

    // main part stops grown
    p.alive = false;
    rollback_traj(ctx, p);
    ctx.kill_span(p, 'g');
    const double seed_a = p.sib_on_hi > 0 ? p.seed_lo : pre_c;
    const double seed_b = p.sib_on_hi > 0 ? pre_c : p.seed_hi;
    const double img_a = sib_at_img_hi ? A : c;
    const double img_b = sib_at_img_hi ? c : B;
    const double d_a = p.sib_on_hi > 0 ? p.d_at_lo : d_c;
    const double d_b = p.sib_on_hi > 0 ? d_c : p.d_at_hi;
    stop_cell(ctx, p, seed_a, seed_b, img_a, img_b, d_a, d_b, false, -1, false);
}

// wait-for-sibling correction: sibling seed interval may have been extended
// by an adjoin in the same phase before it was stepped -- prevented by
// stepping all pieces first (phase A) and dispatching afterwards (phase B).

void run_aux(RunCtx& ctx, const PendingJob& job) {
    ctx.run_lo = job.lo;
    ctx.run_hi = job.hi;
    ctx.t0 = job.t0;
    ctx.mpl = job.mass / (job.hi - job.lo);
    ctx.chain_d_lo = job.chain_d_lo;
    ctx.chain_d_hi = job.chain_d_hi;
    ctx.chain = job.chain;
    ctx.arena.clear();

    Piece root;
    root.seed_lo = job.lo;
    root.seed_hi = job.hi;
    root.img_at_lo = job.lo;
    root.img_at_hi = job.hi;
    root.d_at_lo = root.d_at_hi = 1.0;
    root.chain_d_lo = job.chain_d_lo;
    root.chain_d_hi = job.chain_d_hi;
    root.n = job.t0;
    root.deadline = job.t0;
    root.itin = job.itin;
    root.span = ctx.new_span(ctx.seed_index, job.t0, job.mass, job.parent_span,
                             job.frac_lo, job.frac_hi, job.itin,
                             job.parent_span >= 0 ? 'w' : 's');
    ctx.arena.push_back(root);
    ctx.record_traj(ctx.arena.back());

    // initial refinement by the joined partition at t0
    {
        auto vals = qcut_values(ctx, root.seed_lo, root.seed_hi);
        ChildRange whole = classify_range(ctx, root.seed_lo, root.seed_hi);
        if (!vals.empty() || whole.kind != ChildRange::Kind::Free)
            cut_and_dispatch(ctx, 0, vals, false, false);
    }

    for (int n = job.t0 + 1; n <= ctx.par->time_cap; ++n) {
        // phase A: step every alive piece to time n
        bool any = false;
        for (auto& p : ctx.arena) {
            if (!p.alive || p.n != n - 1) continue;
            any = true;
            p.d_at_lo *= std::fabs(ctx.map->deriv(p.img_at_lo));
            p.d_at_hi *= std::fabs(ctx.map->deriv(p.img_at_hi));
            p.img_at_lo = ctx.map->step(p.img_at_lo);
            p.img_at_hi = ctx.map->step(p.img_at_hi);
            p.n = n;
            // fold guard: an interior critical point makes the endpoint image
            // unrepresentative; freeze the piece and account for it.  Pieces
            // anchored exactly at a critical preimage overshoot zero by one
            // rounding step, so hairline straddles pass through (the next
            // refinement sends the sub-ulp part to the core residual).
            if (p.img_lo() < -1e-13 && p.img_hi() > 1e-13) {
                p.alive = false;
                rollback_traj(ctx, p);
                ctx.kill_span(p, 'r');
                add_residual(ctx, Residual::Kind::FoldGuard, ctx.piece_mass(p), n);
                continue;
            }
            ctx.record_traj(p);
        }
        if (!any) break;

        // phase B: dispatch deadline pieces (shallow cells first), then free
        std::vector<int> at_deadline, free_now;
        const int count = int(ctx.arena.size());
        for (int i = 0; i < count; ++i) {
            const Piece& p = ctx.arena[std::size_t(i)];
            if (!p.alive || p.n != n) continue;
            if (n < p.deadline) continue;  // bound: no cuts, no stops
            if (n == p.deadline && p.t_entry >= 0)
                at_deadline.push_back(i);
            else
                free_now.push_back(i);
        }
        std::stable_sort(at_deadline.begin(), at_deadline.end(), [&](int a, int b) {
            return std::abs(ctx.arena[std::size_t(a)].k_cell) <
                   std::abs(ctx.arena[std::size_t(b)].k_cell);
        });
        for (int i : at_deadline)
            if (ctx.arena[std::size_t(i)].alive) dispatch_deadline(ctx, i);
        for (int i : free_now)
            if (ctx.arena[std::size_t(i)].alive) dispatch_free(ctx, i);
    }

    // time cap leftovers
    for (auto& p : ctx.arena) {
        if (!p.alive) continue;
        p.alive = false;
        ctx.tower->spans[std::size_t(p.span)].death_kind = 'T';
        ctx.tower->spans[std::size_t(p.span)].death = ctx.par->time_cap + 1;
        add_residual(ctx, Residual::Kind::TimeCap, ctx.piece_mass(p),
                     ctx.par->time_cap);
    }
}

// return step for one grown cell; emits a block and up to two chained jobs
void return_step(RunCtx& ctx, int cell_index, int round,
                 std::vector<PendingJob>& jobs) {
    const StoppedCell cell = ctx.tower->cells[std::size_t(cell_index)];
    const double A = cell.img_lo, B = cell.img_hi;
    std::uint64_t fi = 0, li = 0;
    if (!ctx.cover->covered_range(A, B, fi, li)) {
        add_residual(ctx, Residual::Kind::Degenerate, cell.mass, cell.s_abs);
        return;
    }
    const double eps = ctx.par->eps;

    double left_len = ctx.cover->tile(fi).first - A;
    bool left_piece = left_len > 1e-13;
    if (left_piece && left_len < eps) {
        ++fi;  // adjoin the short end piece to the leftmost covered tile
    }
    double right_len = B - ctx.cover->tile(li).second;
    bool right_piece = right_len > 1e-13;
    if (right_piece && right_len < eps) {
        --li;
    }
    if (fi > li || li == std::uint64_t(-1)) {
        add_residual(ctx, Residual::Kind::Degenerate, cell.mass, cell.s_abs);
        return;
    }
    const double c1 = ctx.cover->tile(fi).first;
    const double c2 = ctx.cover->tile(li).second;

    // seed-coordinate preimages of the block edges inside the cell;
    // reconstruct the low-end image to recover the orientation
    const int steps = cell.s_rel;
    double f_lo = cell.seed_lo;
    for (int s = 0; s < steps; ++s) f_lo = ctx.map->step(f_lo);
    auto pre_of = [&](double c) {
        double a = cell.seed_lo, b = cell.seed_hi;
        // reuse RunCtx::preimage with the cell-local bracket
        RunCtx& cc = ctx;
        return cc.preimage(a, b, f_lo, steps, c);
    };
    const double p1 = pre_of(c1), p2 = pre_of(c2);
    const double s_a = std::min(p1, p2), s_b = std::max(p1, p2);
    const double w_all = cell.seed_hi - cell.seed_lo;
    const double m_block = (s_b - s_a) / w_all * cell.mass;
    const bool rising = f_lo < 0.5 * (cell.img_lo + cell.img_hi);

    ReturnBlock blk;
    blk.tile_first = fi;
    blk.tile_last = li;
    blk.R = cell.s_abs;
    blk.mass = m_block;
    blk.img_lo = c1;
    blk.img_hi = c2;
    // chain-total derivative at a seed point: exact within-run product times
    // the interpolated chain prefactor
    const auto d_at_seed = [&](double s) {
        double d = 1.0, x = s;
        for (int st = 0; st < steps; ++st) {
            d *= std::fabs(ctx.map->deriv(x));
            x = ctx.map->step(x);
        }
        return std::max(d, kDerivFloor) *
               log_interp(cell.seed_lo, cell.chain_d_lo, cell.seed_hi,
                          cell.chain_d_hi, s);
    };
    blk.d_lo = d_at_seed(rising ? s_a : s_b);
    blk.d_hi = d_at_seed(rising ? s_b : s_a);
    blk.cell = cell_index;
    blk.seed = ctx.seed_index;
    blk.span = cell.span;
    blk.returned_fraction = (c2 - c1) / (B - A);
    ctx.tower->blocks.push_back(blk);

    auto push_job = [&](double jl, double jh, double sl, double sh) {
        if (jh - jl <= 1e-13) return;
        PendingJob j;
        j.lo = jl;
        j.hi = jh;
        j.t0 = cell.s_abs;
        j.mass = (sh - sl) / w_all * cell.mass;
        j.chain_d_lo = d_at_seed(rising ? sl : sh);
        j.chain_d_hi = d_at_seed(rising ? sh : sl);
        j.chain = cell.chain;
        j.itin = cell.itin;
        j.parent_span = cell.span;
        j.frac_lo = (jl - A) / (B - A);
        j.frac_hi = (jh - A) / (B - A);
        j.round = round + 1;
        jobs.push_back(j);
    };
    // omega^-: [A, c1]; omega^+: [c2, B] (seed shares follow orientation)
    if (rising) {
        push_job(A, c1, cell.seed_lo, s_a);
        push_job(c2, B, s_b, cell.seed_hi);
    } else {
        push_job(A, c1, s_b, cell.seed_hi);
        push_job(c2, B, cell.seed_lo, s_a);
    }
}

}  // namespace

// ---------------------------------------------------------------- driver

TowerModel build_tower(const QuadMap& map, const OpenIntervalSet& hole,
                       const ReferenceCover& cover, const NeighborhoodPartition& part,
                       const BoundRecoveryTables& tables, const TowerParams& params,
                       const std::vector<std::uint64_t>& seed_tiles) {
    if (!(params.eps > 0.0)) throw std::invalid_argument("build_tower: eps <= 0");
    TowerModel tower;
    tower.params = params;
    tower.delta = part.delta;
    tower.k0 = part.k0;
    tower.kmax = part.kmax;
    tower.total_tiles = cover.total_tiles;

    RunCtx ctx;
    ctx.map = &map;
    ctx.hole = &hole;
    ctx.cover = &cover;
    ctx.part = &part;
    ctx.tables = &tables;
    ctx.par = &params;
    ctx.tower = &tower;

    for (std::uint64_t tile : seed_tiles) {
        auto [lo, hi] = cover.tile(tile);
        SeedInfo si;
        si.tile = tile;
        si.lo = lo;
        si.hi = hi;
        tower.seeds.push_back(si);
        ctx.seed_index = int(tower.seeds.size()) - 1;

        std::vector<PendingJob> jobs;
        PendingJob root;
        root.lo = lo;
        root.hi = hi;
        root.t0 = 0;
        root.mass = hi - lo;
        root.round = 0;
        jobs.push_back(root);

        const double floor_mass = params.mass_floor_rel * (hi - lo);
        std::size_t qi = 0;
        while (qi < jobs.size()) {
            PendingJob job = jobs[qi++];
            if (job.round > params.chain_rounds || job.mass < floor_mass ||
                job.t0 >= params.time_cap) {
                Residual r;
                r.kind = Residual::Kind::ChainTruncated;
                r.mass = job.mass;
                r.time = job.t0;
                r.seed = ctx.seed_index;
                tower.residuals.push_back(r);
                continue;
            }
            const std::size_t cells_before = tower.cells.size();
            run_aux(ctx, job);
            for (std::size_t c = cells_before; c < tower.cells.size(); ++c)
                if (!tower.cells[c].fell)
                    return_step(ctx, int(c), job.round, jobs);
        }
    }
    tower.root_span_count = 0;
    for (auto& s : tower.spans)
        if (s.parent < 0) ++tower.root_span_count;
    return tower;
}

TowerModel aux_partition(const QuadMap& map, const OpenIntervalSet& hole,
                         const ReferenceCover& cover, const NeighborhoodPartition& part,
                         const BoundRecoveryTables& tables, const TowerParams& params,
                         double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("aux_partition: empty interval");
    TowerModel scratch;
    scratch.params = params;
    scratch.delta = part.delta;
    scratch.k0 = part.k0;
    scratch.kmax = part.kmax;
    scratch.total_tiles = cover.total_tiles;
    SeedInfo si;
    si.lo = lo;
    si.hi = hi;
    scratch.seeds.push_back(si);
    RunCtx ctx;
    ctx.map = &map;
    ctx.hole = &hole;
    ctx.cover = &cover;
    ctx.part = &part;
    ctx.tables = &tables;
    ctx.par = &params;
    ctx.tower = &scratch;
    ctx.seed_index = 0;
    PendingJob job;
    job.lo = lo;
    job.hi = hi;
    job.t0 = 0;
    job.mass = hi - lo;
    run_aux(ctx, job);
    return scratch;
}

// ---------------------------------------------------------------- model

double TowerModel::seed_mass() const {
    double m = 0;
    for (auto& s : seeds) m += s.width();
    return m;
}

double TowerModel::defect() const {
    double m = 0;
    for (auto& r : residuals) m += r.mass;
    return m;
}

std::vector<double> TowerModel::level_mass(int max_level) const {
    std::vector<double> lm(std::size_t(max_level) + 1, 0.0);
    for (auto& s : spans) {
        const int hi = std::min(s.death, max_level + 1);
        for (int l = s.birth; l < hi; ++l) lm[std::size_t(l)] += s.mass;
    }
    return lm;
}

std::vector<double> TowerModel::level_hole_mass(int max_level) const {
    std::vector<double> lm(std::size_t(max_level) + 1, 0.0);
    for (auto& h : holes)
        if (h.R <= max_level) lm[std::size_t(h.R)] += h.mass;
    return lm;
}

double TowerModel::conservation_error() const {
    double total = 0;
    for (auto& b : blocks) total += b.mass;
    for (auto& h : holes) total += h.mass;
    total += defect();
    const double sm = seed_mass();
    return sm > 0 ? std::fabs(total - sm) / sm : 0.0;
}

// ---------------------------------------------------------------- audits

namespace {

void fit_tail(TailSeries& t) {
    // fit the decaying stretch: below the initial plateau, above the mass
    // threshold, and strictly above the terminal (frozen-residual) level
    const double terminal = t.mass_gt.empty() ? 0.0 : t.mass_gt.back();
    const double floor_m = std::max(1e-6, 1.5 * terminal);
    std::vector<double> xs, ys;
    for (std::size_t n = 0; n < t.mass_gt.size(); ++n) {
        const double m = t.mass_gt[n];
        if (m <= 0.9 && m >= floor_m) {
            if (xs.empty()) t.fit_lo = int(n);
            t.fit_hi = int(n);
            xs.push_back(double(n));
            ys.push_back(std::log(m));
        }
    }
    if (xs.size() >= 5) {
        t.fit = linear_fit(xs, ys);
        t.fit_valid = true;
    }
}

}  // namespace

TailSeries tail_S(const TowerModel& tower) {
    TailSeries t;
    const int cap = tower.params.time_cap;
    std::vector<double> gt(std::size_t(cap) + 1, 0.0);
    double denom = 0.0;
    for (auto& c : tower.cells) {
        denom += c.mass;
        for (int n = 0; n < c.s_rel && n <= cap; ++n) gt[std::size_t(n)] += c.mass;
    }
    for (auto& r : tower.residuals) {
        if (r.kind == Residual::Kind::ChainTruncated) continue;
        denom += r.mass;
        for (int n = 0; n <= cap; ++n) gt[std::size_t(n)] += r.mass;
    }
    if (denom <= 0) return t;
    t.mass_gt.resize(gt.size());
    for (std::size_t n = 0; n < gt.size(); ++n) t.mass_gt[n] = gt[n] / denom;
    fit_tail(t);
    return t;
}

TailSeries tail_R(const TowerModel& tower) {
    TailSeries t;
    const int cap = tower.params.time_cap;
    std::vector<double> resolved(std::size_t(cap) + 2, 0.0);
    for (auto& b : tower.blocks)
        if (b.R <= cap) resolved[std::size_t(b.R)] += b.mass;
    for (auto& h : tower.holes)
        if (h.R <= cap) resolved[std::size_t(h.R)] += h.mass;
    const double sm = tower.seed_mass();
    if (sm <= 0) return t;
    t.mass_gt.resize(std::size_t(cap) + 1);
    double cum = 0.0;
    for (int n = 0; n <= cap; ++n) {
        cum += resolved[std::size_t(n)];
        t.mass_gt[std::size_t(n)] = std::max(0.0, (sm - cum) / sm);
    }
    fit_tail(t);
    return t;
}

HoleFallStats hole_fall_stats(const TowerModel& tower, double mH, double theta_R) {
    HoleFallStats h;
    const int cap = tower.params.time_cap;
    h.mass_at.assign(std::size_t(cap) + 1, 0.0);
    const double sm = tower.seed_mass();
    for (auto& hc : tower.holes)
        if (hc.R <= cap) h.mass_at[std::size_t(hc.R)] += hc.mass / sm;
    for (double m : h.mass_at) h.total += m;

    std::vector<double> xs, ys;
    for (std::size_t n = 0; n < h.mass_at.size(); ++n)
        if (h.mass_at[n] >= 1e-6) {
            xs.push_back(double(n));
            ys.push_back(std::log(h.mass_at[n]));
        }
    if (xs.size() >= 3) {
        h.fit = linear_fit(xs, ys);
        h.fit_valid = true;
    }
    if (mH > 0) {
        for (std::size_t n = 0; n < h.mass_at.size(); ++n) {
            if (h.mass_at[n] <= 0) continue;
            if (theta_R > 0 && theta_R < 1)
                h.D_envelope = std::max(
                    h.D_envelope, h.mass_at[n] / (mH * std::pow(theta_R, double(n))));
            h.Dprime_envelope = std::max(
                h.Dprime_envelope, h.mass_at[n] / (mH * std::exp(-double(n) / 21.0)));
        }
    }
    return h;
}

MeasuredConstants distortion_audit(const QuadMap& map, const TowerModel& tower,
                                   const NeighborhoodPartition& part,
                                   const BoundRecoveryTables& tables,
                                   int samples_per_cell, int max_cells) {
    MeasuredConstants mc;

    // c1/c2/d0: direct cell-pair audits on I_k, k0 <= k <= k0+6
    for (int k = part.k0; k <= std::min(part.kmax, part.k0 + 6); ++k) {
        const double lo = part.cell_inner(k), hi = part.cell_outer(k);
        const int q = tables.q_of(k);
        const int p = tables.p_of(k);
        std::vector<double> pts;
        for (int i = 0; i <= 6; ++i) pts.push_back(lo + (hi - lo) * double(i) / 6.0);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const double x = pts[i], y = pts[i + 1];
            double dx = 1, dy = 1, xx = x, yy = y;
            for (int n = 1; n <= q; ++n) {
                dx *= std::fabs(map.deriv(xx));
                dy *= std::fabs(map.deriv(yy));
                xx = map.step(xx);
                yy = map.step(yy);
                if (n >= 2) {
                    const double lr = std::fabs(std::log(dx / dy));
                    mc.c1 = std::max(mc.c1, lr);
                }
                if (n == q) {
                    const double num = std::fabs(dx / dy - 1.0);
                    const double den = std::fabs(xx - yy);
                    if (den > 0) mc.c2 = std::max(mc.c2, num / den);
                }
            }
            // (P1)(b): derivative along the critical orbit shadow
            const double fx = map.step(x);
            for (int j = 1; j < p; ++j) {
                const double dp = map.deriv_product_abs(fx, j);
                const double ratio = dp / std::pow(1.9, j);
                mc.d0 = std::max(mc.d0, std::max(ratio, 1.0 / ratio));
            }
        }
    }

    // C~, weak bound, c0' from sampled stopped cells
    const std::size_t stride =
        std::max<std::size_t>(1, tower.cells.size() / std::size_t(max_cells));
    std::size_t audited = 0;
    for (std::size_t ci = 0; ci < tower.cells.size(); ci += stride) {
        const auto& cell = tower.cells[ci];
        if (cell.s_rel < 1) continue;
        ++audited;
        const int S = cell.s_rel;
        const int m = std::max(2, samples_per_cell);
        // orbits and derivative products of the sample points
        std::vector<std::vector<double>> pos(std::size_t(m + 1));
        std::vector<std::vector<double>> dp(std::size_t(m + 1));
        for (int i = 0; i <= m; ++i) {
            double x = cell.seed_lo + (cell.seed_hi - cell.seed_lo) * double(i) / double(m);
            double d = 1;
            auto& P = pos[std::size_t(i)];
            auto& D = dp[std::size_t(i)];
            P.push_back(x);
            D.push_back(d);
            for (int n = 1; n <= S; ++n) {
                d *= std::fabs(map.deriv(x));
                x = map.step(x);
                P.push_back(x);
                D.push_back(d);
            }
        }
        // free times of the cell relative to the run start
        auto is_free = [&](int n_rel) {
            const int n_abs = n_rel + cell.seg_t0;
            for (auto& [t, k] : cell.itin)
                if (t <= n_abs && n_abs < t + tables.q_of(k)) return false;
            return true;
        };
        for (int i = 0; i < m; ++i) {
            const auto& Px = pos[std::size_t(i)];
            const auto& Py = pos[std::size_t(i + 1)];
            const auto& Dx = dp[std::size_t(i)];
            const auto& Dy = dp[std::size_t(i + 1)];
            // stop-time ratio (Lemma-4.6 shape); pairs with saturated ratios
            // carry no local slope information and feed the weak-bound
            // statistic instead
            const double num = std::fabs(Dx[std::size_t(S)] / std::max(kDerivFloor, Dy[std::size_t(S)]) - 1.0);
            const double den = std::fabs(Px[std::size_t(S)] - Py[std::size_t(S)]);
            if (den > 1e-14 && num <= 0.5) mc.C_tilde = std::max(mc.C_tilde, num / den);
            if (num > 0.5) mc.weak_bound_max = std::max(mc.weak_bound_max, num);
            // weak bound at free times
            for (int n = 1; n < S; ++n)
                if (is_free(n)) {
                    const double r = std::fabs(
                        Dx[std::size_t(n)] / std::max(kDerivFloor, Dy[std::size_t(n)]) - 1.0);
                    mc.weak_bound_max = std::max(mc.weak_bound_max, r);
                }
        }
        // c0' over the free prefix (before the first (-delta,delta) entry)
        int first_entry = S + 1;
        for (auto& [t, k] : cell.itin)
            if (t > cell.seg_t0) first_entry = std::min(first_entry, t - cell.seg_t0);
        for (int n = 1; n <= std::min(S, first_entry); ++n) {
            const double dpn = dp[std::size_t(samples_per_cell / 2)][std::size_t(n)];
            const double bound = dpn * std::exp(-std::log(1.9) * double(n) / 3.0) / part.delta;
            mc.c0_prime = mc.c0_prime == 0 ? bound : std::min(mc.c0_prime, bound);
        }
    }
    (void)audited;

    // return expansion over every block (model values at the block edges)
    mc.min_return_expansion = std::numeric_limits<double>::infinity();
    for (auto& b : tower.blocks)
        mc.min_return_expansion =
            std::min(mc.min_return_expansion, std::min(b.d_lo, b.d_hi));
    if (tower.blocks.empty()) mc.min_return_expansion = 0;
    return mc;
}

MeasuredConstants measure_constants(const QuadMap& map, const TowerModel& tower,
                                    const NeighborhoodPartition& part,
                                    const BoundRecoveryTables& tables, double mH,
                                    int samples_per_cell) {
    MeasuredConstants mc = distortion_audit(map, tower, part, tables, samples_per_cell);
    const auto tS = tail_S(tower);
    const auto tR = tail_R(tower);
    if (tS.fit_valid) {
        mc.S_rate = -tS.fit.slope;
        mc.C_prime = std::exp(tS.fit.intercept);
    }
    if (tR.fit_valid) {
        mc.theta = std::exp(tR.fit.slope);
        mc.C_dprime = std::exp(tR.fit.intercept);
    }
    const auto hf = hole_fall_stats(tower, mH, mc.theta);
    mc.D = hf.D_envelope;
    mc.D_prime = hf.Dprime_envelope;
    return mc;
}

PieceCountAudit piece_count_audit(const TowerModel& tower) {
    PieceCountAudit a;
    const int cap = tower.params.time_cap;
    // per (seed, level) counts
    std::vector<std::vector<int>> counts(
        tower.seeds.size(), std::vector<int>(std::size_t(cap) + 1, 0));
    for (auto& s : tower.spans) {
        if (s.seed < 0) continue;
        const int hi = std::min(s.death, cap + 1);
        for (int l = s.birth; l < hi; ++l)
            counts[std::size_t(s.seed)][std::size_t(l)] += 1;
    }
    a.max_count.assign(std::size_t(cap) + 1, 0);
    for (auto& per_seed : counts)
        for (int l = 0; l <= cap; ++l)
            a.max_count[std::size_t(l)] =
                std::max(a.max_count[std::size_t(l)], per_seed[std::size_t(l)]);
    for (int n = 1; n <= cap; ++n) {
        const double bound = 8.0 * double(n) * std::pow(2.0, 53.0 * double(n) / 200.0);
        const double ratio = double(a.max_count[std::size_t(n)]) / bound;
        if (ratio > a.max_ratio) {
            a.max_ratio = ratio;
            a.max_ratio_level = n;
        }
    }
    return a;
}

GrowthCheck growth_lemma_check(const QuadMap& map, const OpenIntervalSet& hole,
                               const ReferenceCover& cover,
                               const NeighborhoodPartition& part,
                               const BoundRecoveryTables& tables,
                               const TowerParams& params, int trials,
                               std::uint64_t seed) {
    GrowthCheck g;
    std::uint64_t st = seed;
    for (int t = 0; t < trials; ++t) {
        // random eps-interval inside I avoiding the hole
        double lo;
        for (;;) {
            lo = map.range_lo() +
                 (map.range_hi() - map.range_lo() - params.eps) * u01_from_bits(splitmix64(st));
            const double hi = lo + params.eps;
            bool clean = !hole.contains(lo) && !hole.contains(hi);
            for (auto& [l, r] : hole.comp)
                if (l >= lo && r <= hi) clean = false;
            if (clean) break;
        }
        TowerModel scratch;
        scratch.params = params;
        RunCtx ctx;
        ctx.map = &map;
        ctx.hole = &hole;
        ctx.cover = &cover;
        ctx.part = &part;
        ctx.tables = &tables;
        ctx.par = &params;
        ctx.tower = &scratch;
        ctx.seed_index = 0;
        SeedInfo si;
        si.lo = lo;
        si.hi = lo + params.eps;
        scratch.seeds.push_back(si);
        PendingJob job;
        job.lo = lo;
        job.hi = lo + params.eps;
        job.t0 = 0;
        job.mass = params.eps;
        run_aux(ctx, job);
        ++g.trials;
        bool grew = false;
        for (auto& c : scratch.cells)
            if (!c.fell) {
                grew = true;
                break;
            }
        if (grew) {
            ++g.grew;
            continue;
        }
        // account: did the whole interval fall into the hole (a desk-scale
        // outcome the small-hole premise of the construction excludes)?
        double fell_mass = 0;
        for (auto& c : scratch.cells)
            if (c.fell) fell_mass += c.mass;
        if (fell_mass >= params.eps * (1.0 - 1e-6))
            ++g.absorbed;
        else
            ++g.stalled;
    }
    return g;
}

MarkovCheck markov_return_check(const QuadMap& map, const TowerModel& tower,
                                const ReferenceCover& cover, int max_blocks) {
    MarkovCheck m;
    m.min_grown_length = std::numeric_limits<double>::infinity();
    const std::size_t stride =
        std::max<std::size_t>(1, tower.blocks.size() / std::size_t(max_blocks));
    for (std::size_t bi = 0; bi < tower.blocks.size(); bi += stride) {
        const auto& blk = tower.blocks[bi];
        const auto& cell = tower.cells[std::size_t(blk.cell)];
        ++m.sampled;
        m.min_return_fraction = std::min(m.min_return_fraction, blk.returned_fraction);

        // the block edges must be the tile edges of its destination range
        m.max_tile_misalignment = std::max(
            {m.max_tile_misalignment,
             std::fabs(blk.img_lo - cover.tile(blk.tile_first).first),
             std::fabs(blk.img_hi - cover.tile(blk.tile_last).second)});

        // re-measure the stop length from the stored seed endpoints
        double xlo = cell.seed_lo, xhi = cell.seed_hi;
        for (int s = 0; s < cell.s_rel; ++s) {
            xlo = map.step(xlo);
            xhi = map.step(xhi);
        }
        m.min_grown_length = std::min(m.min_grown_length, std::fabs(xhi - xlo));

        // re-iterate the bisected preimages of the block edges
        auto check_edge = [&](double target) {
            double a = cell.seed_lo, b = cell.seed_hi;
            const bool rising = xlo < xhi;
            double t = std::min(std::max(target, std::min(xlo, xhi)),
                                std::max(xlo, xhi));
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + b);
                if (mid <= a || mid >= b) break;
                double y = mid;
                for (int s = 0; s < cell.s_rel; ++s) y = map.step(y);
                if ((y < t) == rising)
                    a = mid;
                else
                    b = mid;
            }
            double y = 0.5 * (a + b);
            for (int s = 0; s < cell.s_rel; ++s) y = map.step(y);
            m.max_endpoint_error = std::max(m.max_endpoint_error, std::fabs(y - target));
        };
        check_edge(blk.img_lo);
        check_edge(blk.img_hi);
    }
    if (tower.blocks.empty()) m.min_grown_length = 0;
    return m;
}

}  // namespace openmap
