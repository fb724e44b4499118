#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "elastoscan/monotonicity.hpp"

using namespace elastoscan;

namespace {

constexpr double kMakrolonLambda = 2.8910e9;
constexpr double kMakrolonMu = 1.1808e9;
constexpr double kMakrolonRho = 1171.0;
constexpr double kAluminumLambda = 5.1084e10;
constexpr double kAluminumMu = 2.6316e10;
constexpr double kAluminumRho = 2700.0;

IsotropicMaterial makrolon() { return {kMakrolonLambda, kMakrolonMu, kMakrolonRho}; }
IsotropicMaterial aluminum() { return {kAluminumLambda, kAluminumMu, kAluminumRho}; }

// Counts eigenvalues of a symmetric matrix strictly below x through plain
// Householder reduction to tridiagonal form and the Sturm pivot recurrence;
// shares no code with the eigensolver used by the library.
int inertia_count_below(const Eigen::MatrixXd& matrix, double x) {
    Eigen::MatrixXd A = 0.5 * (matrix + matrix.transpose()).eval();
    const int n = static_cast<int>(A.rows());
    for (int k = 0; k + 2 < n; ++k) {
        Eigen::VectorXd col = A.col(k).segment(k + 1, n - k - 1);
        double nrm = col.norm();
        if (nrm == 0.0) continue;
        double alpha = col[0] >= 0.0 ? -nrm : nrm;
        Eigen::VectorXd v = col;
        v[0] -= alpha;
        double vn = v.norm();
        if (vn < 1e-300) continue;
        v /= vn;
        auto S = A.block(k + 1, k + 1, n - k - 1, n - k - 1);
        Eigen::VectorXd w = S * v;
        double c = v.dot(w);
        S -= 2.0 * (v * w.transpose() + w * v.transpose());
        S += 4.0 * c * (v * v.transpose());
        A(k + 1, k) = alpha;
        A(k, k + 1) = alpha;
        for (int r = k + 2; r < n; ++r) {
            A(r, k) = 0.0;
            A(k, r) = 0.0;
        }
    }
    int count = 0;
    double q = 1.0;
    for (int i = 0; i < n; ++i) {
        double off = i > 0 ? A(i, i - 1) : 0.0;
        if (q == 0.0) q = 1e-300;
        q = (A(i, i) - x) - (i > 0 ? off * off / q : 0.0);
        if (q < 0.0) ++count;
    }
    return count;
}

PlateGeometry edge_patch_geometry() {
    PlateGeometry g;
    g.length_x = 0.30;
    g.length_y = 0.30;
    g.thickness = 0.01;
    BoundaryPatch clamp;
    clamp.bc = BcKind::dirichlet;
    clamp.shape = PatchShape::rect;
    clamp.side = Side::xmin;
    clamp.s0 = 0.15;
    clamp.t0 = 0.005;
    clamp.extent_s = 0.30;
    clamp.extent_t = 0.01;
    clamp.name = "clamp";
    g.dirichlet_patches.push_back(clamp);
    for (Side side : {Side::ymin, Side::ymax}) {
        BoundaryPatch p;
        p.bc = BcKind::neumann;
        p.shape = PatchShape::rect;
        p.side = side;
        p.s0 = 0.15;
        p.t0 = 0.005;
        p.extent_s = 0.06;
        p.extent_t = 0.01;
        p.name = side == Side::ymin ? "drive0" : "drive1";
        g.neumann_patches.push_back(p);
    }
    return g;
}

// Coarse clamped plate with an aluminum 2x2-element block centred on grid
// cell (2,2); contrast strengths can be scaled for assumption sweeps.
struct ToyCase {
    PlateGeometry geometry;
    Mesh mesh;
    LoadBasis basis;
    MaterialField background;
    MaterialField inclusion;
    NtDMatrix L0;
    NtDMatrix Lm;
    std::vector<DisplacementField> u0;
    TestInclusionGrid grid;
    FrequencyConfig freq;
    double psi_lambda = kAluminumLambda - kMakrolonLambda;
    double psi_rho = kAluminumRho - kMakrolonRho;
};

MaterialField block_inclusion_materials(const Mesh& mesh, const MaterialField& background,
                                        double stiffness_scale) {
    MaterialField m = background;
    for (int j = 4; j <= 5; ++j)
        for (int i = 4; i <= 5; ++i) {
            int e = mesh.element_id(i, j, 0);
            m.lambda[e] += (kAluminumLambda - kMakrolonLambda) * stiffness_scale;
            m.mu[e] += (kAluminumMu - kMakrolonMu) * stiffness_scale;
            m.rho[e] = kAluminumRho;
        }
    return m;
}

ToyCase make_toy() {
    ToyCase t;
    t.geometry = edge_patch_geometry();
    t.mesh = make_plate_mesh(t.geometry, 0.03);
    t.basis = build_load_basis(t.mesh, t.geometry);
    t.background = uniform_material(t.mesh, makrolon());
    t.inclusion = block_inclusion_materials(t.mesh, t.background, 1.0);
    t.freq = FrequencyConfig::from_hz(5.0);
    t.L0 = ntd_matrix(t.mesh, t.background, t.freq, t.basis, "background");
    t.Lm = ntd_matrix(t.mesh, t.inclusion, t.freq, t.basis, "measured");
    AssembledSystem sys = assemble(t.mesh, t.background, t.freq);
    t.u0 = solve_basis(sys, t.mesh, t.basis);
    t.grid = test_inclusion_grid(t.geometry, 5, 5);
    return t;
}

TEST(EigenvalueCount, CountsStrictlyBelowThreshold) {
    Eigen::MatrixXd M = Eigen::Vector3d(1.0, -1.0, -2.0).asDiagonal();
    auto [c0, eigs] = count_negative_eigenvalues(M, 0.0);
    EXPECT_EQ(c0, 2);
    ASSERT_EQ(eigs.size(), 3u);
    EXPECT_DOUBLE_EQ(eigs[0], -2.0);
    EXPECT_DOUBLE_EQ(eigs[1], -1.0);
    EXPECT_DOUBLE_EQ(eigs[2], 1.0);

    EXPECT_EQ(count_negative_eigenvalues(M, 1.5).first, 1);
    EXPECT_EQ(count_negative_eigenvalues(M, 1.0).first, 1);
}

TEST(EigenvalueCount, RejectsBadInput) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(3, 3);
    M(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(count_negative_eigenvalues(M, 0.0), InvalidMatrixError);
    EXPECT_THROW(count_negative_eigenvalues(Eigen::MatrixXd::Zero(2, 3), 0.0),
                 InvalidMatrixError);
    EXPECT_THROW(count_negative_eigenvalues(Eigen::MatrixXd::Zero(0, 0), 0.0),
                 InvalidMatrixError);
    EXPECT_THROW(count_negative_eigenvalues(Eigen::MatrixXd::Identity(2, 2), -1.0), ConfigError);
}

TEST(EigenvalueCount, LargeDefectSymmetrizedFirst) {
    Eigen::MatrixXd M(2, 2);
    M << 0.0, 1.0, 0.0, 0.0;
    auto [count, eigs] = count_negative_eigenvalues(M, 0.0);
    EXPECT_EQ(count, 1);
    EXPECT_NEAR(eigs[0], -0.5, 1e-14);
    EXPECT_NEAR(eigs[1], 0.5, 1e-14);
}

TEST(EigenvalueCount, MatchesInertiaOracle) {
    std::mt19937 rng(20260416);
    std::uniform_real_distribution<double> entry(-1.0, 1.0);
    std::uniform_int_distribution<int> dim(2, 12);
    for (int trial = 0; trial < 100; ++trial) {
        int n = dim(rng);
        Eigen::MatrixXd A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = entry(rng);
        A = 0.5 * (A + A.transpose()).eval();
        if (trial % 3 == 0) A *= 1e-12;
        double nrm = symmetric_spectral_norm(A);
        for (double delta : {0.0, 1e-8, 1e-2 * nrm}) {
            if (trial % 3 == 0 && delta == 1e-8) continue;   // threshold above spectrum, trivial
            auto [count, eigs] = count_negative_eigenvalues(A, delta);
            EXPECT_EQ(count, inertia_count_below(A, -delta))
                << "trial " << trial << " n=" << n << " delta=" << delta;
        }
    }
}

TEST(EigenvalueCount, NonIncreasingInThreshold) {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> entry(-1.0, 1.0);
    Eigen::MatrixXd A(9, 9);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) A(i, j) = entry(rng);
    A = 0.5 * (A + A.transpose()).eval();
    int prev = 9;
    for (double delta : {0.0, 0.05, 0.2, 0.5, 1.0, 3.0}) {
        int c = count_negative_eigenvalues(A, delta).first;
        EXPECT_LE(c, prev);
        prev = c;
    }
}

TEST(ShapeTest, NullDataFlagged) {
    ToyCase t = make_toy();
    TestParameters params;
    TestOutcome out = monotonicity_test(t.mesh, t.u0, t.grid.boxes[12], t.L0, t.L0, params,
                                        t.freq, 12);
    EXPECT_EQ(out.box_id, 12);
    EXPECT_EQ(out.negative_count, 0);
    EXPECT_TRUE(out.inside);
    EXPECT_TRUE(out.null_data);
}

TEST(ShapeTest, MismatchedInputsRejected) {
    ToyCase t = make_toy();
    TestParameters params;

    NtDMatrix small;
    small.entries = Eigen::MatrixXd::Zero(5, 5);
    small.omega = t.freq.omega;
    EXPECT_THROW(monotonicity_test(t.mesh, t.u0, t.grid.boxes[0], t.L0, small, params, t.freq),
                 DimensionError);

    NtDMatrix shifted = t.Lm;
    shifted.omega *= 1.001;
    EXPECT_THROW(monotonicity_test(t.mesh, t.u0, t.grid.boxes[0], t.L0, shifted, params, t.freq),
                 ConfigError);

    Box off = t.grid.boxes[0];
    off.min.x() += 0.005;
    EXPECT_THROW(monotonicity_test(t.mesh, t.u0, off, t.L0, t.Lm, params, t.freq),
                 AlignmentError);

    TestParameters bad;
    bad.alpha = {-1.0, 0.0, 0.0};
    EXPECT_THROW(monotonicity_test(t.mesh, t.u0, t.grid.boxes[0], t.L0, t.Lm, bad, t.freq),
                 ConfigError);
    bad = TestParameters{};
    bad.rho_sign = 0;
    EXPECT_THROW(monotonicity_test(t.mesh, t.u0, t.grid.boxes[0], t.L0, t.Lm, bad, t.freq),
                 ConfigError);
}

TEST(ShapeTest, StifferInclusionKeepsDifferencePositive) {
    ToyCase t = make_toy();
    TestParameters params;
    params.delta = 1e-8 * symmetric_spectral_norm(t.L0.entries);
    for (int id : {0, 7, 12, 24}) {
        TestOutcome out = monotonicity_test(t.mesh, t.u0, t.grid.boxes[id], t.L0, t.Lm, params,
                                            t.freq, id);
        EXPECT_EQ(out.negative_count, 0) << "box " << id;
        EXPECT_TRUE(out.inside);
        EXPECT_FALSE(out.null_data);
    }
}

TEST(ShapeTest, InsideBoxAcceptedExteriorCornerRejected) {
    ToyCase t = make_toy();
    TestParameters params;
    params.alpha = {1e-2 * t.psi_lambda, 1e-2 * t.psi_lambda, t.psi_rho};

    TestOutcome center = monotonicity_test(t.mesh, t.u0, t.grid.boxes[12], t.L0, t.Lm, params,
                                           t.freq, 12);
    EXPECT_EQ(center.negative_count, 0);
    EXPECT_TRUE(center.inside);

    TestOutcome corner = monotonicity_test(t.mesh, t.u0, t.grid.boxes[0], t.L0, t.Lm, params,
                                           t.freq, 0);
    EXPECT_EQ(corner.negative_count, 3);
    EXPECT_FALSE(corner.inside);
    EXPECT_TRUE(std::is_sorted(corner.eigenvalues.begin(), corner.eigenvalues.end()));
    int below = 0;
    for (double s : corner.eigenvalues)
        if (s < -params.delta) ++below;
    EXPECT_EQ(below, corner.negative_count);
}

TEST(ShapeTest, NoiseBelowThresholdCannotCreateCounts) {
    ToyCase t = make_toy();
    const double delta_hat = 1e-15;
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> entry(-1.0, 1.0);
    Eigen::MatrixXd E(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) E(i, j) = entry(rng);
    E = 0.5 * (E + E.transpose()).eval();
    E *= 0.99 * delta_hat / symmetric_spectral_norm(E);

    NtDMatrix noisy = t.L0;
    noisy.entries += E;
    TestParameters params;
    params.delta = delta_hat;
    TestOutcome out = monotonicity_test(t.mesh, t.u0, t.grid.boxes[3], t.L0, noisy, params,
                                        t.freq, 3);
    EXPECT_EQ(out.negative_count, 0);
    EXPECT_TRUE(out.inside);
}

TEST(ThresholdSelection, GapRule) {
    EXPECT_EQ(select_threshold({0, 0, 1, 6, 6, 7}), 1);
    EXPECT_EQ(select_threshold({6, 0, 7, 0, 6, 1}), 1);
    EXPECT_EQ(select_threshold({0, 1, 2}), 0);
    EXPECT_EQ(select_threshold({5, 9}), 5);
    EXPECT_THROW(select_threshold({3, 3, 3}), NoGapError);
    EXPECT_THROW(select_threshold({4}), InsufficientDataError);
    EXPECT_THROW(select_threshold({}), InsufficientDataError);
}

TEST(Assumption, BackgroundBoundaryCase) {
    ToyCase t = make_toy();
    AssumptionReport r = check_assumption(t.mesh, t.u0, t.background, t.background, t.freq);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.rhs, 0.0);
    EXPECT_FALSE(r.holds);
}

TEST(Assumption, StiffnessOnlyContrastHoldsAndScalesLinearly) {
    ToyCase t = make_toy();
    MaterialField stiff = t.background;
    MaterialField stiff2 = t.background;
    for (int j = 4; j <= 5; ++j)
        for (int i = 4; i <= 5; ++i) {
            int e = t.mesh.element_id(i, j, 0);
            stiff.lambda[e] += 1e9;
            stiff.mu[e] += 5e8;
            stiff2.lambda[e] += 2e9;
            stiff2.mu[e] += 1e9;
        }
    AssumptionReport r1 = check_assumption(t.mesh, t.u0, stiff, t.background, t.freq);
    AssumptionReport r2 = check_assumption(t.mesh, t.u0, stiff2, t.background, t.freq);
    EXPECT_GT(r1.lhs, 0.0);
    EXPECT_EQ(r1.rhs, 0.0);
    EXPECT_TRUE(r1.holds);
    EXPECT_NEAR(r2.lhs / r1.lhs, 2.0, 1e-12);
}

TEST(Assumption, DensityOnlyContrastFails) {
    ToyCase t = make_toy();
    MaterialField dense = t.background;
    for (int e = 0; e < t.mesh.element_count(); ++e) dense.rho[e] += 500.0;
    AssumptionReport r = check_assumption(t.mesh, t.u0, dense, t.background, t.freq);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_GT(r.rhs, 0.0);
    EXPECT_FALSE(r.holds);
}

TEST(Assumption, MismatchedFieldsRejected) {
    ToyCase t = make_toy();
    MaterialField wrong = t.background;
    wrong.lambda.pop_back();
    wrong.mu.pop_back();
    wrong.rho.pop_back();
    EXPECT_THROW(check_assumption(t.mesh, t.u0, wrong, t.background, t.freq), DimensionError);
}

TEST(AssumptionSweep, RejectsBadRanges) {
    ToyCase t = make_toy();
    EXPECT_THROW(assumption_failure_frequency(t.mesh, t.basis, t.inclusion, t.background, 0.0,
                                              10.0),
                 ConfigError);
    EXPECT_THROW(assumption_failure_frequency(t.mesh, t.basis, t.inclusion, t.background, 10.0,
                                              5.0),
                 ConfigError);
    EXPECT_THROW(assumption_failure_frequency(t.mesh, t.basis, t.inclusion, t.background, 5.0,
                                              10.0, 1),
                 ConfigError);
    EXPECT_THROW(assumption_failure_frequency(t.mesh, t.basis, t.inclusion, t.background, 5.0,
                                              10.0, 8, 0.0),
                 ConfigError);
}

TEST(AssumptionSweep, NoFlipInsideHoldingBand) {
    ToyCase t = make_toy();
    MaterialField weak = block_inclusion_materials(t.mesh, t.background, 5e-4);
    AssumptionSweepResult r =
        assumption_failure_frequency(t.mesh, t.basis, weak, t.background, 4.0, 8.0, 4);
    EXPECT_FALSE(r.found);
    EXPECT_TRUE(std::isnan(r.f_star_hz));
}

TEST(AssumptionSweep, LocatesFlipWithinTolerance) {
    ToyCase t = make_toy();
    MaterialField weak = block_inclusion_materials(t.mesh, t.background, 5e-4);
    AssumptionSweepResult r =
        assumption_failure_frequency(t.mesh, t.basis, weak, t.background, 5.0, 60.0, 10, 0.5);
    ASSERT_TRUE(r.found);
    EXPECT_LE(r.hi_hz - r.lo_hz, 0.5);
    EXPECT_GT(r.f_star_hz, 9.0);
    EXPECT_LT(r.f_star_hz, 14.0);

    auto holds_at = [&](double f_hz) {
        FrequencyConfig fc = FrequencyConfig::from_hz(f_hz);
        AssembledSystem sys = assemble(t.mesh, t.background, fc);
        auto u = solve_basis(sys, t.mesh, t.basis);
        return check_assumption(t.mesh, u, weak, t.background, fc).holds;
    };
    EXPECT_TRUE(holds_at(r.lo_hz));
    EXPECT_FALSE(holds_at(r.hi_hz));
}

ReconstructParameters toy_sweep_params(const ToyCase& t) {
    ReconstructParameters params;
    params.alphas = {{1e-3 * t.psi_lambda, 1e-3 * t.psi_lambda, t.psi_rho},
                     {1e-2 * t.psi_lambda, 1e-2 * t.psi_lambda, t.psi_rho}};
    params.m_tilde = 1;
    return params;
}

TEST(Reconstruct, EmptyGridGivesEmptyResult) {
    ToyCase t = make_toy();
    TestInclusionGrid empty;
    ReconstructParameters params = toy_sweep_params(t);
    ReconstructionResult r = reconstruct(t.mesh, empty, t.L0, t.Lm, t.u0, params, t.freq);
    EXPECT_TRUE(r.outcomes.empty());
    EXPECT_TRUE(r.accepted.empty());
    EXPECT_EQ(r.completed_mask.count(), 0u);
    EXPECT_EQ(r.m_tilde_used, 1);
}

TEST(Reconstruct, MaxOverSweepMatchesSingleTests) {
    ToyCase t = make_toy();
    ReconstructParameters params = toy_sweep_params(t);
    ReconstructionResult r = reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, params, t.freq);
    ASSERT_EQ(r.outcomes.size(), 25u);
    ASSERT_EQ(r.member_counts.size(), 25u);

    for (int id : {0, 4, 12, 17, 22}) {
        int expected = 0;
        for (size_t a = 0; a < params.alphas.size(); ++a) {
            TestParameters single;
            single.alpha = params.alphas[a];
            single.delta = params.delta;
            single.rho_sign = params.rho_sign;
            TestOutcome one = monotonicity_test(t.mesh, t.u0, t.grid.boxes[id], t.L0, t.Lm,
                                                single, t.freq, id);
            EXPECT_EQ(one.negative_count, r.member_counts[id][a]);
            expected = std::max(expected, one.negative_count);
        }
        EXPECT_EQ(r.outcomes[id].negative_count, expected) << "box " << id;
        EXPECT_EQ(r.outcomes[id].box_id, id);
    }
}

TEST(Reconstruct, AcceptsPositiveCellsAtStrictThresholdOne) {
    ToyCase t = make_toy();
    ReconstructParameters params = toy_sweep_params(t);
    ReconstructionResult r = reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, params, t.freq);

    std::vector<int> expected = {4, 8, 9, 12, 13, 14, 18, 19, 24};
    EXPECT_EQ(r.accepted, expected);
    for (const TestOutcome& o : r.outcomes) {
        bool in_accepted =
            std::find(r.accepted.begin(), r.accepted.end(), o.box_id) != r.accepted.end();
        EXPECT_EQ(o.inside, in_accepted);
    }

    RegionMask manual(t.mesh.element_count());
    for (int id : expected) {
        RegionMask cell = box_elements(t.mesh, t.grid.boxes[id]);
        for (size_t e = 0; e < cell.size(); ++e)
            if (cell.at(e)) manual.set(e);
    }
    manual = outer_support_completion(manual, t.mesh);
    ASSERT_EQ(r.completed_mask.size(), manual.size());
    for (size_t e = 0; e < manual.size(); ++e)
        EXPECT_EQ(r.completed_mask.at(e), manual.at(e));
}

TEST(Reconstruct, AutoThresholdMatchesGapRule) {
    ToyCase t = make_toy();
    ReconstructParameters params = toy_sweep_params(t);
    params.m_tilde.reset();
    ReconstructionResult r = reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, params, t.freq);

    std::vector<int> counts;
    for (const TestOutcome& o : r.outcomes) counts.push_back(o.negative_count);
    EXPECT_EQ(r.m_tilde_used, select_threshold(counts) + 1);
    EXPECT_TRUE(r.auto_threshold);
    EXPECT_EQ(r.m_tilde_used, 1);

    ReconstructParameters explicit_params = toy_sweep_params(t);
    ReconstructionResult rx =
        reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, explicit_params, t.freq);
    EXPECT_EQ(r.accepted, rx.accepted);
}

TEST(Reconstruct, AcceptedSetGrowsWithThreshold) {
    ToyCase t = make_toy();
    std::vector<int> previous;
    for (int m_tilde : {1, 2, 3, 4}) {
        ReconstructParameters params = toy_sweep_params(t);
        params.m_tilde = m_tilde;
        ReconstructionResult r = reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, params, t.freq);
        for (int id : previous)
            EXPECT_TRUE(std::find(r.accepted.begin(), r.accepted.end(), id) != r.accepted.end())
                << "m_tilde " << m_tilde << " lost box " << id;
        previous = r.accepted;
    }
    EXPECT_EQ(previous.size(), 25u);
}

TEST(Reconstruct, NullMeasurementFlaggedAndUngappable) {
    ToyCase t = make_toy();
    ReconstructParameters params;
    params.alphas = {{0.0, 0.0, 0.0}};
    params.m_tilde = 1;
    ReconstructionResult r = reconstruct(t.mesh, t.grid, t.L0, t.L0, t.u0, params, t.freq);
    EXPECT_EQ(r.accepted.size(), 25u);
    for (const TestOutcome& o : r.outcomes) {
        EXPECT_TRUE(o.null_data);
        EXPECT_EQ(o.negative_count, 0);
    }
    EXPECT_EQ(r.completed_mask.count(), static_cast<size_t>(t.mesh.element_count()));

    params.m_tilde.reset();
    EXPECT_THROW(reconstruct(t.mesh, t.grid, t.L0, t.L0, t.u0, params, t.freq), NoGapError);
}

TEST(Reconstruct, DeterministicRerun) {
    ToyCase t = make_toy();
    ReconstructParameters params = toy_sweep_params(t);
    ReconstructionResult a = reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, params, t.freq);
    ReconstructionResult b = reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, params, t.freq);
    EXPECT_EQ(a.accepted, b.accepted);
    ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
    for (size_t k = 0; k < a.outcomes.size(); ++k) {
        EXPECT_EQ(a.outcomes[k].negative_count, b.outcomes[k].negative_count);
        EXPECT_EQ(a.outcomes[k].eigenvalues, b.outcomes[k].eigenvalues);
    }
}

TEST(Reconstruct, MismatchedInputsRejected) {
    ToyCase t = make_toy();
    ReconstructParameters params = toy_sweep_params(t);

    NtDMatrix small;
    small.entries = Eigen::MatrixXd::Zero(5, 5);
    small.omega = t.freq.omega;
    EXPECT_THROW(reconstruct(t.mesh, t.grid, t.L0, small, t.u0, params, t.freq), DimensionError);

    NtDMatrix shifted = t.Lm;
    shifted.omega *= 1.001;
    EXPECT_THROW(reconstruct(t.mesh, t.grid, t.L0, shifted, t.u0, params, t.freq), ConfigError);

    ReconstructParameters empty;
    empty.m_tilde = 1;
    EXPECT_THROW(reconstruct(t.mesh, t.grid, t.L0, t.Lm, t.u0, empty, t.freq), ConfigError);

    TestInclusionGrid off_grid = test_inclusion_grid(t.geometry, 7, 7);
    EXPECT_THROW(reconstruct(t.mesh, off_grid, t.L0, t.Lm, t.u0, params, t.freq),
                 AlignmentError);
}

TEST(MonotonicityBounds, EqualMaterialsGiveZeroReport) {
    ToyCase t = make_toy();
    for (auto verify : {verify_monotonicity_lower, verify_monotonicity_upper}) {
        MonotonicityCheckReport r = verify(t.mesh, t.background, t.background, t.freq, t.basis);
        ASSERT_EQ(r.margin.size(), 6u);
        for (size_t i = 0; i < r.margin.size(); ++i) {
            EXPECT_EQ(r.lhs[i], 0.0);
            EXPECT_EQ(r.rhs[i], 0.0);
            EXPECT_EQ(r.margin[i], 0.0);
        }
        EXPECT_EQ(r.violations(), 0);
    }
}

TEST(MonotonicityBounds, StaticLimitStifferPairHasNoViolations) {
    ToyCase t = make_toy();
    MaterialField stiffer = t.background;
    for (int e = 0; e < t.mesh.element_count(); ++e) {
        stiffer.lambda[e] *= 2.0;
        stiffer.mu[e] *= 2.0;
    }
    FrequencyConfig slow = FrequencyConfig::from_rad_s(1e-3);
    MonotonicityCheckReport lower =
        verify_monotonicity_lower(t.mesh, stiffer, t.background, slow, t.basis);
    EXPECT_EQ(lower.violations(1e-8), 0);
    for (double l : lower.lhs) EXPECT_GT(l, 0.0);

    MonotonicityCheckReport upper =
        verify_monotonicity_upper(t.mesh, stiffer, t.background, slow, t.basis);
    EXPECT_EQ(upper.violations(1e-8), 0);
}

TEST(MonotonicityBounds, SubResonanceTablePairBounds) {
    ToyCase t = make_toy();
    MaterialField plate = uniform_material(t.mesh, makrolon());
    MaterialField metal = uniform_material(t.mesh, aluminum());

    MonotonicityCheckReport upper =
        verify_monotonicity_upper(t.mesh, metal, plate, t.freq, t.basis);
    EXPECT_EQ(upper.violations(1e-8), 0);

    MonotonicityCheckReport l1 = verify_monotonicity_lower(t.mesh, metal, plate, t.freq, t.basis);
    MonotonicityCheckReport l2 = verify_monotonicity_lower(t.mesh, metal, plate, t.freq, t.basis);
    EXPECT_EQ(l1.violations(1e-8), l2.violations(1e-8));
    EXPECT_EQ(l1.margin, l2.margin);
}

TEST(MonotonicityBounds, ReportScalesQuadraticallyWithLoads) {
    ToyCase t = make_toy();
    MaterialField stiffer = t.background;
    for (int e = 0; e < t.mesh.element_count(); ++e) {
        stiffer.lambda[e] *= 1.5;
        stiffer.mu[e] *= 1.5;
    }
    MonotonicityCheckReport base =
        verify_monotonicity_lower(t.mesh, stiffer, t.background, t.freq, t.basis);

    LoadBasis scaled = t.basis;
    for (auto& load : scaled.loads)
        for (auto& tr : load.traction) tr *= 3.0;
    MonotonicityCheckReport big =
        verify_monotonicity_lower(t.mesh, stiffer, t.background, t.freq, scaled);

    ASSERT_EQ(base.margin.size(), big.margin.size());
    for (size_t i = 0; i < base.margin.size(); ++i) {
        EXPECT_NEAR(big.lhs[i], 9.0 * base.lhs[i], 1e-10 * std::abs(9.0 * base.lhs[i]) + 1e-300);
        EXPECT_NEAR(big.rhs[i], 9.0 * base.rhs[i], 1e-10 * std::abs(9.0 * base.rhs[i]) + 1e-300);
    }
    EXPECT_EQ(base.violations(1e-8), big.violations(1e-8));
}

} // namespace
