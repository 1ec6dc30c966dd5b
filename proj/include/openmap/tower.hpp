#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openmap/fitting.hpp"
#include "openmap/quadmap.hpp"

namespace openmap {

// Reference intervals tiling [1-a,1]\H with widths in [eps, 2 eps], split at
// +-delta and 0 so every tile lies wholly inside or outside (-delta, delta).
// Tiles are uniform per segment and indexed globally in spatial order.
struct ReferenceCover {
    double eps = 0.0;
    double delta = 0.0;
    struct Segment {
        double lo, hi;
        std::uint64_t tile0;  // global index of the first tile
        std::uint64_t count;
        double width;
    };
    std::vector<Segment> segments;
    std::uint64_t total_tiles = 0;

    std::pair<double, double> tile(std::uint64_t idx) const;
    // Maximal contiguous run of tiles fully inside [A,B]; false if none.
    bool covered_range(double A, double B, std::uint64_t& first,
                       std::uint64_t& last) const;
};

ReferenceCover build_reference_cover(const QuadMap& map, const OpenIntervalSet& hole,
                                     double delta, double eps);

struct TowerParams {
    double eps = 0.0;                // reference length scale (required > 0)
    double growth_factor = 65536.0;  // 4^8
    int time_cap = 400;
    int chain_rounds = 8;
    double width_floor = 0.0;        // seed-coordinate width below which a
                                     // piece is frozen as degenerate residual;
                                     // 0 = auto from the expansion budget
    double mass_floor_rel = 1e-8;    // chain jobs below this fraction of the
                                     // seed go to the defect
    double grown_stop() const { return growth_factor * eps; }
    // binary64 seed coordinates resolve images to ~ulp * expansion, so the
    // floor keeps re-iterated endpoints within the 1e-8 Markov tolerance
    // (images reach at most 4 * grown_stop in one step)
    double effective_width_floor() const {
        return width_floor > 0.0 ? width_floor
                                 : std::max(1e-13, 4.0 * grown_stop() / 5e6);
    }
};

// One element of the partition generated by an auxiliary run: either the
// image grew past 4^8 eps or it fell into the hole.
struct StoppedCell {
    double seed_lo = 0, seed_hi = 0;  // coordinates inside the aux-run seed
    double run_lo = 0, run_hi = 0;    // the aux-run seed interval itself
    int seg_t0 = 0;                   // absolute time at the aux-run seed
    int s_abs = 0, s_rel = 0;
    bool fell = false;
    int hole_component = -1;
    double img_lo = 0, img_hi = 0;  // image interval at the stop time
    double mass = 0;
    double d_lo = 0, d_hi = 0;            // |(T^{s_rel})'| at seed endpoints
    double chain_d_lo = 0, chain_d_hi = 0;  // derivative prefactor from the tile
    std::vector<int> chain;                 // auxiliary stop times S_1 < S_2 < ...
    std::vector<std::pair<int, int>> itin;  // absolute (time, cell) itinerary
    int span = -1;
    bool adjoin_flagged = false;  // affected by the capture-first / missing-
                                  // sibling resolution at a q-deadline stop
};

// Contiguous range of reference tiles returned by one grown cell.
struct ReturnBlock {
    std::uint64_t tile_first = 0, tile_last = 0;  // inclusive
    int R = 0;
    double mass = 0;
    double img_lo = 0, img_hi = 0;
    double d_lo = 0, d_hi = 0;  // chain-total |(T^R)'| at the block edges
    int cell = -1;              // index into cells
    int seed = -1;              // index into processed seeds
    int span = -1;
    double returned_fraction = 0;  // |block| / |cell image|
};

struct HoleCell {
    int R = 0;
    double mass = 0;
    int component = -1;
    int cell = -1;
    int seed = -1;
    int span = -1;
};

struct Residual {
    enum class Kind { Core, Degenerate, TimeCap, ChainTruncated, FoldGuard };
    Kind kind;
    double mass = 0;
    int time = 0;
    int seed = -1;
};

// Piece genealogy: one span per maximal unreturned piece, alive on tower
// levels birth <= l < death.  Trajectory rows carry the image interval and
// the chain-total derivative at the two piece endpoints per level.
struct PieceSpan {
    int seed = -1;
    int birth = 0, death = 0;
    double mass = 0;
    char origin = '?';      // s seed root, c partition cut, H hole cut,
                            // a adjoin extension, w chained omega piece
    char death_kind = '?';  // c cut, g grown, h hole, r residual, T cap, A adjoin-split
    int parent = -1;
    double frac_lo = 0, frac_hi = 1;  // position inside the parent image at birth
    std::vector<int> children;
    std::vector<std::pair<int, int>> itin;
    struct TrajRow {
        double img_lo, img_hi, d_lo, d_hi;
    };
    std::vector<TrajRow> traj;  // one row per level in [birth, death)
    int cell = -1;              // StoppedCell index for 'g'/'h' deaths
};

struct SeedInfo {
    std::uint64_t tile = 0;
    double lo = 0, hi = 0;
    double width() const { return hi - lo; }
};

struct TowerModel {
    TowerParams params;
    double delta = 0;
    int k0 = 6, kmax = 40;
    std::uint64_t total_tiles = 0;
    std::vector<SeedInfo> seeds;
    std::vector<StoppedCell> cells;
    std::vector<ReturnBlock> blocks;
    std::vector<HoleCell> holes;
    std::vector<Residual> residuals;
    std::vector<PieceSpan> spans;
    int root_span_count = 0;  // spans with parent < 0 are seed/reseed roots

    double seed_mass() const;
    double defect() const;  // residual + truncated mass
    // per-level alive mass (levels + hole cells separately), absolute units
    std::vector<double> level_mass(int max_level) const;
    std::vector<double> level_hole_mass(int max_level) const;
    // conservation: blocks + holes + defect vs seed mass, relative error
    double conservation_error() const;
};

// Full return-time construction over a set of sampled seed tiles.
TowerModel build_tower(const QuadMap& map, const OpenIntervalSet& hole,
                       const ReferenceCover& cover, const NeighborhoodPartition& part,
                       const BoundRecoveryTables& tables, const TowerParams& params,
                       const std::vector<std::uint64_t>& seed_tiles);

// One auxiliary run on the interval [lo, hi] (stops when a piece grows past
// 4^8 eps or falls into the hole, no return chaining).  The result holds the
// stopped cells with their auxiliary stop times plus the residual report.
TowerModel aux_partition(const QuadMap& map, const OpenIntervalSet& hole,
                         const ReferenceCover& cover, const NeighborhoodPartition& part,
                         const BoundRecoveryTables& tables, const TowerParams& params,
                         double lo, double hi);

// Evenly spaced deterministic seed tile sample.
std::vector<std::uint64_t> sample_seed_tiles(const ReferenceCover& cover,
                                             std::size_t count);

// ---- audits ----------------------------------------------------------

struct TailSeries {
    std::vector<double> mass_gt;  // normalized m{time > n}, index n
    LinearFit fit;                // log m{.>n} ~ n over the fit window
    int fit_lo = 0, fit_hi = 0;
    bool fit_valid = false;
};

// Auxiliary stop-time tail over every aux run (mass-weighted, normalized).
TailSeries tail_S(const TowerModel& tower);
// Full return-time tail per seed column (normalized by the seed mass).
TailSeries tail_R(const TowerModel& tower);

struct HoleFallStats {
    std::vector<double> mass_at;  // normalized m{R = n and fell}, index n
    double total = 0.0;
    LinearFit fit;       // log mass ~ n (theta-hat = e^slope)
    bool fit_valid = false;
    double D_envelope = 0.0;        // sup mass_at[n] / (m(H) theta_R^n)
    double Dprime_envelope = 0.0;   // sup vs m(H) e^{-n/21}
};

HoleFallStats hole_fall_stats(const TowerModel& tower, double mH, double theta_R);

struct MeasuredConstants {
    double C_prime = 0;     // S-tail prefactor at the fitted rate
    double S_rate = 0;      // fitted S-tail rate (-slope)
    double C_dprime = 0;    // R-tail prefactor
    double theta = 0;       // fitted R-tail ratio e^{slope}
    double D = 0, D_prime = 0;
    double c1 = 0, c2 = 0, C_tilde = 0, d0 = 0, c0_prime = 0;
    double min_return_expansion = 0;  // min |(T^R)'| over returned blocks
    double weak_bound_max = 0;        // max |ratio - 1| at free times
};

// Samples distortion ratios at q(k), at free times and at stop times and
// reports the smallest admissible constants.
MeasuredConstants distortion_audit(const QuadMap& map, const TowerModel& tower,
                                   const NeighborhoodPartition& part,
                                   const BoundRecoveryTables& tables,
                                   int samples_per_cell = 64, int max_cells = 400);

// Distortion audit plus tail and hole-fall fits in one record.
MeasuredConstants measure_constants(const QuadMap& map, const TowerModel& tower,
                                    const NeighborhoodPartition& part,
                                    const BoundRecoveryTables& tables, double mH,
                                    int samples_per_cell = 64);

struct PieceCountAudit {
    std::vector<int> max_count;  // per level, max over seeds
    double max_ratio = 0.0;      // vs 8 n 2^{53n/200}, levels >= 1
    int max_ratio_level = 0;
};

PieceCountAudit piece_count_audit(const TowerModel& tower);

struct GrowthCheck {
    int trials = 0;
    int grew = 0;      // some descendant reached 4^8 eps before the cap
    int absorbed = 0;  // the interval fell into the hole entirely first
    int stalled = 0;   // hit the time cap without growing (genuine failure)
    bool pass() const { return stalled == 0 && grew + absorbed == trials; }
};

// Runs mini auxiliary partitions on random eps-length intervals.
GrowthCheck growth_lemma_check(const QuadMap& map, const OpenIntervalSet& hole,
                               const ReferenceCover& cover,
                               const NeighborhoodPartition& part,
                               const BoundRecoveryTables& tables,
                               const TowerParams& params, int trials,
                               std::uint64_t seed);

struct MarkovCheck {
    int sampled = 0;
    double max_endpoint_error = 0.0;  // re-iterated cell endpoints vs tile edges
    double min_grown_length = 0.0;    // re-measured stop lengths vs 4^8 eps
    double min_return_fraction = 1.0; // covered-tile share of each grown image
};

MarkovCheck markov_return_check(const QuadMap& map, const TowerModel& tower,
                                const ReferenceCover& cover, int max_blocks = 200);

}  // namespace openmap
