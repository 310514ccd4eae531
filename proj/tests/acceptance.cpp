// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Runs against a deterministic 32-scene mini-dataset
// generated into a temporary directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "beamkit/beampattern.hpp"
#include "beamkit/metrics.hpp"
#include "beamkit/oracle.hpp"
#include "beamkit/trainer.hpp"

using namespace beamkit;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    void fail(const std::string& why) {
        pass = false;
        detail = detail.empty() ? why : detail + "; " + why;
    }
    void note(const std::string& info) {
        detail = detail.empty() ? info : detail + "; " + info;
    }
};

int g_failures = 0;

void run_criterion(int id, const std::string& name, const std::function<void(Outcome&)>& fn) {
    Outcome out;
    try {
        fn(out);
    } catch (const std::exception& e) {
        out.fail(std::string("exception: ") + e.what());
    }
    if (!out.pass) g_failures++;
    std::printf("[%s] C%02d %s%s%s\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
                out.detail.empty() ? "" : " -- ", out.detail.c_str());
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.gaussian();
    return x;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b, std::size_t lo,
              std::size_t hi) {
    double num = 0, den = 0;
    for (std::size_t k = lo; k < hi; k++) {
        num += (a[k] - b[k]) * (a[k] - b[k]);
        den += a[k] * a[k];
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

// ---- shared mini-dataset ---------------------------------------------------

struct MiniDataset {
    std::vector<Scene> scenes;
    ArrayGeometry geometry = default_array();
};

MiniDataset make_mini_dataset(int count, std::uint64_t seed, double duration) {
    MiniDataset ds;
    ds.scenes.resize(count);
    parallel_for(std::size_t(count), [&](std::size_t i) {
        SceneSpec spec = dataset_scene_spec(seed, int(i), duration);
        ds.scenes[i] = simulate_scene(spec, ds.geometry);
    });
    return ds;
}

// ---- criterion 10 helpers (finite differences) ------------------------------

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

Var weighted_sum(Tape& tape, Var out) {
    Tensor c(ad::V(out).shape);
    Rng rng(99);
    for (auto& v : c.v) v = rng.uniform(0.5, 1.5);
    return ad::sum_all(ad::mul(out, tape.leaf(std::move(c))));
}

using BuildFn = std::function<Var(Tape&, std::vector<Var>&)>;

double max_rel_grad_error(std::vector<Tensor> inputs, const BuildFn& build) {
    Tape tape;
    std::vector<Var> vars;
    for (auto& t : inputs) vars.push_back(tape.leaf(t));
    Var loss = build(tape, vars);
    tape.backward(loss);
    auto eval = [&](const std::vector<Tensor>& xs) {
        Tape t2;
        std::vector<Var> vs;
        for (const auto& x : xs) vs.push_back(t2.leaf(x));
        return t2.val(build(t2, vs)).v[0];
    };
    double worst = 0;
    for (std::size_t k = 0; k < inputs.size(); k++)
        for (std::size_t i = 0; i < inputs[k].size(); i++) {
            double x0 = inputs[k].v[i];
            double eps = 1e-5 * std::max(1.0, std::fabs(x0));
            auto plus = inputs, minus = inputs;
            plus[k].v[i] = x0 + eps;
            minus[k].v[i] = x0 - eps;
            double fd = (eval(plus) - eval(minus)) / (2 * eps);
            double ag = tape.grad(vars[k]).v[i];
            worst = std::max(worst,
                             std::fabs(ag - fd) / std::max({std::fabs(ag), std::fabs(fd), 1.0}));
        }
    return worst;
}

ArrayGeometry tiny_geometry() {
    ArrayGeometry g;
    g.positions = {0.0, 0.02};
    g.pairs = {{0, 1}};
    g.reference = 0;
    return g;
}

Scene tiny_scene(std::uint64_t seed, std::size_t length) {
    auto g = tiny_geometry();
    Rng rt(seed), ri(seed + 1000);
    std::vector<double> s(length), n(length);
    for (auto& v : s) v = rt.gaussian();
    for (auto& v : n) v = ri.gaussian();
    SceneSpec spec;
    spec.target_doa_deg = 35.0;
    spec.interferer_doa_deg = 140.0;
    spec.sir_db = 0.0;
    spec.seed = seed;
    return simulate_scene(spec, g, s, n);
}

template <typename Pipeline>
double max_rel_pipeline_grad_error(const Pipeline& pipe, ParamStore& ps, const TrainScene& s) {
    Tape tape;
    Ctx ctx{tape, ps};
    auto fwd = pipe.forward(ctx, s.mixture, s.target_doa_deg);
    Var loss = ad::si_sdr_loss(fwd.estimate, s.target_ref);
    tape.backward(loss);
    auto grads = ctx.grads();
    auto eval = [&]() {
        Tape t2;
        Ctx c2{t2, ps};
        auto f2 = pipe.forward(c2, s.mixture, s.target_doa_deg);
        return t2.val(ad::si_sdr_loss(f2.estimate, s.target_ref)).v[0];
    };
    double worst = 0;
    for (const auto& name : ps.order) {
        Tensor& p = ps.at(name);
        for (std::size_t i = 0; i < p.size(); i++) {
            double x0 = p.v[i];
            double eps = 1e-5 * std::max(1.0, std::fabs(x0));
            p.v[i] = x0 + eps;
            double fp = eval();
            p.v[i] = x0 - eps;
            double fm = eval();
            p.v[i] = x0;
            double fd = (fp - fm) / (2 * eps);
            double ag = grads.at(name).v[i];
            worst = std::max(worst,
                             std::fabs(ag - fd) / std::max({std::fabs(ag), std::fabs(fd), 1.0}));
        }
    }
    return worst;
}

// ---- criterion 11 toy configuration -----------------------------------------

PipelineConfig smoke_config() {
    PipelineConfig c;
    c.domain = Domain::td;
    c.channels = 8;
    c.window_length = 40;
    c.hop = 20;
    c.filters = 64;
    c.variant = BfVariant::an_mcwf;
    c.multichannel_mask = true;  // Eq. 26 statistics
    c.tcn_bottleneck = 32;
    c.tcn_hidden = 48;
    c.tcn_repeats = 1;
    c.tcn_blocks = 2;
    c.head_proj = 32;
    c.head_gru = 256;
    c.seed = 11;
    return c;
}

}  // namespace

int main() {
    std::printf("beamkit acceptance suite\n");
    auto tmp = std::filesystem::temp_directory_path() / "beamkit_acceptance";
    std::filesystem::remove_all(tmp);
    std::filesystem::create_directories(tmp);

    // shared mini-dataset (criteria 5, 6, 7, 12)
    auto t_ds = std::chrono::steady_clock::now();
    MiniDataset ds = make_mini_dataset(32, 2024, 1.0);
    std::printf("mini-dataset: 32 scenes, 1.0 s each (%.1f s to synthesize)\n",
                seconds_since(t_ds));

    run_criterion(1, "STFT perfect reconstruction (sqrt-Hann, N=512, H=256)", [&](Outcome& o) {
        auto t0 = std::chrono::steady_clock::now();
        FrameGrid grid(512, 256);
        auto kernel = StftKernel::sqrt_hann(512);
        double worst = 0;
        for (int i = 0; i < 10; i++) {
            auto x = random_signal(4096, 100 + i);
            auto spec = stft_mono(x, kernel, grid);
            auto y = istft(spec, kernel);
            worst = std::max(worst, rel_l2(x, y.ch(0), 512, y.length() - 512));
        }
        double dt = seconds_since(t0);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "max interior rel err %.2e, %.2f s", worst, dt);
        o.note(buf);
        if (worst >= 1e-10) o.fail("reconstruction error above 1e-10");
        if (dt >= 1.0) o.fail("runtime above 1 s");
    });

    run_criterion(2, "SI-SDR analytic identities", [&](Outcome& o) {
        std::vector<double> s(256), e(256);
        for (std::size_t k = 0; k < s.size(); k++) {
            s[k] = std::sin(kTwoPi * 8.0 * double(k) / 256.0);
            e[k] = std::cos(kTwoPi * 8.0 * double(k) / 256.0);
        }
        double ps = 0, pe = 0;
        for (std::size_t k = 0; k < s.size(); k++) {
            ps += s[k] * s[k];
            pe += e[k] * e[k];
        }
        double g = std::sqrt(ps / (10.0 * pe));
        std::vector<double> est(256);
        for (std::size_t k = 0; k < s.size(); k++) est[k] = s[k] + g * e[k];
        double dev = std::fabs(si_sdr_db(est, s) - 10.0);
        if (dev >= 1e-9) o.fail("orthogonal-noise identity deviates");
        std::vector<double> est2(est), est3(est);
        for (auto& v : est2) v *= 4.0;
        for (auto& v : est3) v *= 2.7;
        if (si_sdr_db(est2, s) != si_sdr_db(est, s)) o.fail("power-of-two scale not bit-exact");
        if (std::fabs(si_sdr_db(est3, s) - si_sdr_db(est, s)) > 1e-12)
            o.fail("general scale deviates beyond machine precision");
        char buf[96];
        std::snprintf(buf, sizeof(buf), "orthogonal dev %.1e dB", dev);
        o.note(buf);
    });

    run_criterion(3, "MVDR distortionless constraint (Eq. 13 / Eq. 19)", [&](Outcome& o) {
        Rng rng(7);
        double worst = 0;
        for (int set = 0; set < 20; set++) {
            // frequency-domain: 16 bins of random well-conditioned statistics
            std::size_t M = 8;
            FdScmAgg nn_agg, ss_agg;
            nn_agg.channels = ss_agg.channels = M;
            nn_agg.values.assign(16, std::vector<cplx>(M * M));
            ss_agg.values.assign(16, std::vector<cplx>(M * M));
            for (std::size_t f = 0; f < 16; f++) {
                std::vector<cplx> b(M * M), v(M);
                for (auto& x : b) x = cplx(rng.gaussian(), rng.gaussian());
                for (auto& x : v) x = cplx(rng.gaussian(), rng.gaussian());
                for (std::size_t i = 0; i < M; i++)
                    for (std::size_t j = 0; j < M; j++) {
                        cplx acc = (i == j) ? cplx(1, 0) : cplx(0, 0);
                        for (std::size_t k = 0; k < M; k++)
                            acc += b[i * M + k] * std::conj(b[j * M + k]);
                        nn_agg.values[f][i * M + j] = acc;
                        ss_agg.values[f][i * M + j] = v[i] * std::conj(v[j]);
                    }
            }
            auto w = fd_eq_mvdr(nn_agg, ss_agg, 0);
            for (std::size_t f = 0; f < 16; f++) {
                auto v = principal_eigenvector(ss_agg.values[f], M, 0);
                cplx resp(0);
                for (std::size_t i = 0; i < M; i++) resp += std::conj(w.ti[f][i]) * v[i];
                worst = std::max(worst, std::abs(resp - v[0]));
            }
            // time-domain: 16 frames of random well-conditioned statistics
            TdScm r_nn, r_ss;
            r_nn.channels = r_ss.channels = M;
            r_nn.mode = r_ss.mode = TdAveraging::per_frame;
            r_nn.values.assign(16, {std::vector<double>(M * M)});
            r_ss.values.assign(16, {std::vector<double>(M * M)});
            for (std::size_t t = 0; t < 16; t++) {
                std::vector<double> b(M * M), h(M);
                for (auto& x : b) x = rng.gaussian();
                for (auto& x : h) x = rng.gaussian();
                for (std::size_t i = 0; i < M; i++)
                    for (std::size_t j = 0; j < M; j++) {
                        double acc = (i == j) ? 1.0 : 0.0;
                        for (std::size_t k = 0; k < M; k++) acc += b[i * M + k] * b[j * M + k];
                        r_nn.values[t][0][i * M + j] = acc;
                        r_ss.values[t][0][i * M + j] = h[i] * h[j];
                    }
            }
            auto wt = td_eq_mvdr(r_nn, r_ss, 0);
            for (std::size_t t = 0; t < 16; t++) {
                auto h = principal_eigenvector(r_ss.values[t][0], M, 0);
                double resp = 0;
                for (std::size_t i = 0; i < M; i++) resp += wt.frame_constant[t][i] * h[i];
                worst = std::max(worst, std::fabs(resp - h[0]));
            }
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "max |w^H v - v_ref| = %.2e", worst);
        o.note(buf);
        if (worst > 1e-6) o.fail("distortionless deviation above 1e-6");
    });

    run_criterion(4, "Wiener optimality of the per-frame TD-MCWF (Eq. 23)", [&](Outcome& o) {
        // broadband sources keep the per-frame normal equations well
        // conditioned for the unregularized reference solve
        Rng rt(301), ri(302);
        SceneSpec spec;
        spec.target_doa_deg = 55.0;
        spec.interferer_doa_deg = 130.0;
        spec.sir_db = 0.0;
        Scene sc = simulate_scene(spec, ds.geometry, synth_broadband_like(16000, 16000.0, rt),
                                  synth_broadband_like(16000, 16000.0, ri));
        TdSetup setup;
        auto yf = frame(sc.mixture, setup.grid);
        auto s_ref = frame_channel(sc.target.ch(0), setup.grid);
        auto r_yy = td_scm(yf, ScmKind::yy, TdAveraging::per_frame);
        auto r_ys = td_cross(yf, s_ref, TdAveraging::per_frame);
        auto w = td_eq_mcwf(r_yy, r_ys);
        std::size_t M = 8, N = setup.grid.window_length;
        Rng rng(5);
        double worst = 0;
        int checked = 0;
        for (int attempt = 0; attempt < 4000 && checked < 20; attempt++) {
            std::size_t t = rng.uniform_index(yf.size());
            std::vector<double> a(M * M, 0.0), b(M, 0.0);
            for (std::size_t n = 0; n < N; n++)
                for (std::size_t i = 0; i < M; i++) {
                    b[i] += yf[t][i][n] * s_ref[t][n];
                    for (std::size_t j = 0; j < M; j++) a[i * M + j] += yf[t][i][n] * yf[t][j][n];
                }
            double tr = 0;
            for (std::size_t i = 0; i < M; i++) tr += a[i * M + i];
            if (tr < 1e-6) continue;  // (near-)silent frame: no least-squares target
            std::vector<double> wls;
            try {
                wls = solve_dense(a, b, M, "acceptance ls");
            } catch (const std::exception&) {
                continue;  // rank-deficient frame (activity ramp); not well-posed
            }
            auto mse = [&](const std::vector<double>& wv) {
                double acc = 0;
                for (std::size_t n = 0; n < N; n++) {
                    double e = -s_ref[t][n];
                    for (std::size_t i = 0; i < M; i++) e += wv[i] * yf[t][i][n];
                    acc += e * e;
                }
                return acc / double(N);
            };
            worst = std::max(worst, std::fabs(mse(w.frame_constant[t]) - mse(wls)));
            checked++;
        }
        if (checked < 20) o.fail("fewer than 20 well-posed frames found");
        char buf[96];
        std::snprintf(buf, sizeof(buf), "max residual difference %.2e", worst);
        o.note(buf);
        if (worst >= 1e-8) o.fail("closed form deviates from brute-force least squares");
    });

    // criteria 5 and 6 share the oracle runs over the mini-dataset
    std::vector<double> sdr_td(ds.scenes.size()), sdr_fd(ds.scenes.size());
    std::vector<double> sdr_ibm(ds.scenes.size()), sdr_irm(ds.scenes.size()),
        sdr_ipsm(ds.scenes.size());
    double oracle_runtime = 0;
    {
        auto t0 = std::chrono::steady_clock::now();
        parallel_for(ds.scenes.size(), [&](std::size_t i) {
            const auto& sc = ds.scenes[i];
            const auto& ref = sc.target.ch(0);
            sdr_td[i] = si_sdr_db(oracle_td_mcwf(sc, TdSetup{}), ref);
            sdr_fd[i] = si_sdr_db(oracle_fd_mcwf(sc, FdSetup{}), ref);
        });
        oracle_runtime = seconds_since(t0);
        parallel_for(ds.scenes.size(), [&](std::size_t i) {
            const auto& sc = ds.scenes[i];
            const auto& ref = sc.target.ch(0);
            FdSetup fd;
            sdr_ibm[i] = si_sdr_db(oracle_ideal_mask(sc, MaskKind::ibm, fd), ref);
            sdr_irm[i] = si_sdr_db(oracle_ideal_mask(sc, MaskKind::irm, fd), ref);
            sdr_ipsm[i] = si_sdr_db(oracle_ideal_mask(sc, MaskKind::ipsm, fd), ref);
        });
    }
    auto mean_of = [](const std::vector<double>& v) {
        double acc = 0;
        for (double x : v) acc += x;
        return acc / double(v.size());
    };

    run_criterion(5, "oracle TD-MCWF beats oracle FD-MCWF by >= 15 dB", [&](Outcome& o) {
        double td = mean_of(sdr_td), fd = mean_of(sdr_fd);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "TD %.2f dB, FD %.2f dB, gap %.2f dB, %.1f s", td, fd,
                      td - fd, oracle_runtime);
        o.note(buf);
        if (td - fd < 15.0) o.fail("gap below 15 dB");
        if (oracle_runtime >= 120.0) o.fail("runtime above 2 min");
    });

    run_criterion(6, "ideal-mask ordering (IPSM above IRM and IBM)", [&](Outcome& o) {
        double ibm = mean_of(sdr_ibm), irm = mean_of(sdr_irm), ipsm = mean_of(sdr_ipsm);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "IBM %.2f, IRM %.2f, IPSM %.2f dB", ibm, irm, ipsm);
        o.note(buf);
        if (!(ipsm > irm)) o.fail("IPSM does not beat IRM");
        if (!(ipsm > ibm)) o.fail("IPSM does not beat IBM");
        if (std::fabs(irm - ibm) > 1.0) o.fail("|IRM - IBM| above 1 dB");
    });

    run_criterion(7, "latent-domain eq-TV-MCWF beats eq-TI-MCWF", [&](Outcome& o) {
        Rng rng(3);
        auto bank = LearnableFilterBank::random(8, 40, 128, rng, 0);
        double ti = 0, tv = 0;
        int n = 8;
        std::vector<double> tis(n), tvs(n);
        parallel_for(std::size_t(n), [&](std::size_t i) {
            const auto& sc = ds.scenes[i];
            const auto& ref = sc.target.ch(0);
            TdSetup setup;
            tis[i] = si_sdr_db(oracle_latent_mcwf(sc, bank, LatentVariant::time_invariant, setup),
                               ref);
            tvs[i] = si_sdr_db(oracle_latent_mcwf(sc, bank, LatentVariant::time_variant, setup),
                               ref);
        });
        ti = mean_of(tis);
        tv = mean_of(tvs);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "TV %.2f dB, TI %.2f dB", tv, ti);
        o.note(buf);
        if (!(tv > ti)) o.fail("TV does not beat TI");
    });

    run_criterion(8, "directional-feature discrimination (FD-DF, LD-DF)", [&](Outcome& o) {
        auto g = default_array();
        auto kernel = StftKernel::sqrt_hann(512);
        Rng bank_rng(12);
        auto bank = LearnableFilterBank::random(8, 40, 64, bank_rng, 0);
        Rng rng(2025);

        auto active_mean = [](const std::vector<std::vector<double>>& df,
                              const std::vector<std::vector<double>>& energy) {
            std::vector<double> sorted;
            for (const auto& row : energy) sorted.insert(sorted.end(), row.begin(), row.end());
            std::sort(sorted.begin(), sorted.end());
            double thresh = sorted[sorted.size() * 7 / 10];
            double acc = 0;
            std::size_t n = 0;
            for (std::size_t t = 0; t < df.size(); t++)
                for (std::size_t f = 0; f < df[t].size(); f++)
                    if (energy[t][f] > thresh) {
                        acc += df[t][f];
                        n++;
                    }
            return acc / double(std::max<std::size_t>(n, 1));
        };

        double fd_true_sum = 0, fd_far_sum = 0, ld_true_sum = 0, ld_far_sum = 0;
        for (int i = 0; i < 16; i++) {
            double theta = 20.0 + double(rng.uniform_index(141));  // keep far angles in range
            double far = theta <= 90.0 ? theta + 45.0 + double(rng.uniform_index(45))
                                       : theta - 45.0 - double(rng.uniform_index(45));
            Rng srng(900 + i);
            auto src = synth_voiced_like(8000, 16000.0, srng);
            auto img = propagate(src, g, theta, 16000.0);

            auto spec = stft(img, kernel, FrameGrid(512, 256));
            auto l = lps(spec, 0);
            auto phases = ipd(spec, g.pairs);
            fd_true_sum += active_mean(fd_df(phases, t_ipd(g, theta, kernel)), l);
            fd_far_sum += active_mean(fd_df(phases, t_ipd(g, far, kernel)), l);

            auto latent = encode(img, bank, FrameGrid(40, 20));
            auto d = icd(latent, g.pairs);
            auto r = spectral_r(latent, 0);
            ld_true_sum += active_mean(ld_df(d, t_icd(bank, g, theta)), r);
            ld_far_sum += active_mean(ld_df(d, t_icd(bank, g, far)), r);
        }
        double fd_true = fd_true_sum / 16, fd_far = fd_far_sum / 16;
        double ld_true = ld_true_sum / 16, ld_far = ld_far_sum / 16;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "FD-DF %.3f vs %.3f, LD-DF %.3f vs %.3f", fd_true, fd_far,
                      ld_true, ld_far);
        o.note(buf);
        if (!(fd_true > 0 && fd_far <= 0.8 * fd_true))
            o.fail("FD-DF margin below 20%");
        if (!(ld_true > 0 && ld_far <= 0.8 * ld_true))
            o.fail("LD-DF margin below 20%");
    });

    run_criterion(9, "T-IPD impulse template vs analytic form", [&](Outcome& o) {
        auto g = default_array();
        auto kernel = StftKernel::sqrt_hann(512);
        Rng rng(8);
        double worst = 0;
        for (int trial = 0; trial < 10; trial++) {
            double theta = rng.uniform(0.0, 180.0);
            std::size_t pair_index = rng.uniform_index(g.pairs.size());
            auto a = t_ipd(g, theta, kernel);
            auto b = t_ipd_analytic(g, theta, 512, kernel.bands());
            std::size_t fmax = std::size_t(0.9 * 256.0);
            for (std::size_t f = 0; f < fmax; f++)
                worst = std::max(worst, std::fabs(wrap_phase(a.t_ipd[pair_index][f] -
                                                             b.t_ipd[pair_index][f])));
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "max deviation %.2e rad", worst);
        o.note(buf);
        if (worst >= 1e-3) o.fail("template deviates above 1e-3 rad");
    });

    run_criterion(10, "gradient integrity (primitives and both pipelines)", [&](Outcome& o) {
        auto t0 = std::chrono::steady_clock::now();
        double worst_prim = 0;
        for (std::uint64_t seed : {1, 2, 3}) {
            Rng rng(seed);
            Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng, 0.5, 1.5);
            Tensor s = random_tensor({1}, rng, 0.5, 1.5);
            Tensor m1 = random_tensor({3, 4}, rng), m2 = random_tensor({4, 2}, rng);
            Tensor rv = random_tensor({4}, rng), cv = random_tensor({3}, rng);
            Tensor alpha = random_tensor({4}, rng, 0.1, 0.5);
            Tensor pos = random_tensor({3, 4}, rng, 0.3, 2.0);
            Tensor cx = random_tensor({7, 3}, rng), ck = random_tensor({3, 3}, rng);
            Tensor sig = random_tensor({28}, rng), fr = random_tensor({5, 8}, rng);
            Tensor re = random_tensor({5, 5}, rng), im = random_tensor({5, 5}, rng);
            for (auto& v : a.v)
                if (std::fabs(v) < 0.05) v = 0.1;

            auto W = [&](const char*, double e) { worst_prim = std::max(worst_prim, e); };
            W("add", max_rel_grad_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::add(v[0], v[1]));
              }));
            W("sub", max_rel_grad_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::sub(v[0], v[1]));
              }));
            W("mul", max_rel_grad_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::mul(v[0], v[1]));
              }));
            W("div", max_rel_grad_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::div(v[0], v[1]));
              }));
            W("badd", max_rel_grad_error({a, s}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::badd(v[0], v[1]));
              }));
            W("bmul", max_rel_grad_error({a, s}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::bmul(v[0], v[1]));
              }));
            W("relu", max_rel_grad_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::relu(v[0]));
              }));
            W("prelu", max_rel_grad_error({a, alpha}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::prelu(v[0], v[1]));
              }));
            W("sigmoid", max_rel_grad_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::sigmoid(v[0]));
              }));
            W("tanh", max_rel_grad_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::tanh_op(v[0]));
              }));
            W("sqrt", max_rel_grad_error({pos}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::sqrt_op(v[0]));
              }));
            W("log", max_rel_grad_error({pos}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::log_op(v[0]));
              }));
            W("matmul", max_rel_grad_error({m1, m2}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::matmul(v[0], v[1]));
              }));
            W("add_rowvec", max_rel_grad_error({a, rv}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::add_rowvec(v[0], v[1]));
              }));
            W("mul_rowvec", max_rel_grad_error({a, rv}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::mul_rowvec(v[0], v[1]));
              }));
            W("mul_colvec", max_rel_grad_error({a, cv}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::mul_colvec(v[0], v[1]));
              }));
            W("slice/concat", max_rel_grad_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                  Var cols = ad::concat_cols({ad::slice_cols(v[0], 1, 3),
                                              ad::slice_cols(v[1], 0, 2)});  // [3 x 4]
                  Var rows = ad::concat_rows({ad::slice_rows(v[0], 0, 1),
                                              ad::slice_rows(v[1], 1, 3)});  // [3 x 4]
                  return weighted_sum(t, ad::add(ad::reshape(cols, {3, 4}), rows));
              }));
            W("conv1d_dw d1", max_rel_grad_error({cx, ck}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::conv1d_dw(v[0], v[1], 1));
              }));
            W("conv1d_dw d2", max_rel_grad_error({cx, ck}, [](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::conv1d_dw(v[0], v[1], 2));
              }));
            FrameGrid grid(8, 4);
            W("frame", max_rel_grad_error({sig}, [grid](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::frame_signal(v[0], grid));
              }));
            std::vector<double> scale(grid.cover_length(5), 0.7);
            W("ola", max_rel_grad_error({fr}, [grid, scale](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::overlap_add_scaled(v[0], grid, scale));
              }));
            static StftKernel k8 = StftKernel::sqrt_hann(8);
            W("istft", max_rel_grad_error({re, im}, [grid](Tape& t, std::vector<Var>& v) {
                  return weighted_sum(t, ad::istft_synth(v[0], v[1], k8, grid));
              }));
            std::vector<double> ref(24);
            Rng rr(seed + 40);
            for (auto& v : ref) v = rr.gaussian();
            Tensor est = random_tensor({24}, rng);
            for (std::size_t i = 0; i < est.size(); i++) est.v[i] += 0.5 * ref[i];
            W("si_sdr", max_rel_grad_error({est}, [ref](Tape& t, std::vector<Var>& v) {
                  return ad::si_sdr_loss(v[0], ref);
              }));
            // gru cell via parameters
            ParamStore gps;
            nn::Gru gru{"g", 3, 8};
            gru.init(gps, rng);
            Tensor gx = random_tensor({4, 3}, rng);
            {
                Tape tape;
                Ctx ctx{tape, gps};
                Var loss = weighted_sum(tape, gru.forward_seq(ctx, ctx.constant(gx)));
                tape.backward(loss);
                auto grads = ctx.grads();
                for (const auto& name : gps.order) {
                    Tensor& p = gps.at(name);
                    for (std::size_t i = 0; i < p.size(); i++) {
                        double x0 = p.v[i];
                        double eps = 1e-5 * std::max(1.0, std::fabs(x0));
                        auto eval = [&]() {
                            Tape t2;
                            Ctx c2{t2, gps};
                            return t2
                                .val(weighted_sum(t2, gru.forward_seq(c2, c2.constant(gx))))
                                .v[0];
                        };
                        p.v[i] = x0 + eps;
                        double fp = eval();
                        p.v[i] = x0 - eps;
                        double fm = eval();
                        p.v[i] = x0;
                        double fd = (fp - fm) / (2 * eps);
                        double ag = grads.at(name).v[i];
                        worst_prim = std::max(
                            worst_prim,
                            std::fabs(ag - fd) / std::max({std::fabs(ag), std::fabs(fd), 1.0}));
                    }
                }
            }
        }

        double worst_e2e = 0;
        for (std::uint64_t seed : {1, 2, 3}) {
            PipelineConfig tdc;
            tdc.domain = Domain::td;
            tdc.channels = 2;
            tdc.window_length = 8;
            tdc.hop = 4;
            tdc.filters = 16;
            tdc.variant = BfVariant::an_mcwf;
            tdc.multichannel_mask = true;
            tdc.tcn_bottleneck = 6;
            tdc.tcn_hidden = 6;
            tdc.tcn_repeats = 1;
            tdc.tcn_blocks = 2;
            tdc.head_proj = 8;
            tdc.head_gru = 12;
            TdPipeline tdp(tdc, tiny_geometry());
            ParamStore ps1;
            Rng r1(seed);
            tdp.init(ps1, r1);
            auto s1 = to_train_scene(tiny_scene(seed, 48));
            worst_e2e = std::max(worst_e2e, max_rel_pipeline_grad_error(tdp, ps1, s1));

            PipelineConfig fdc;
            fdc.domain = Domain::fd;
            fdc.channels = 2;
            fdc.window_length = 8;
            fdc.hop = 4;
            fdc.variant = BfVariant::an_mvdr;
            fdc.tcn_bottleneck = 6;
            fdc.tcn_hidden = 6;
            fdc.tcn_repeats = 1;
            fdc.tcn_blocks = 2;
            fdc.fd_head_proj = 8;
            fdc.fd_head_gru = 12;
            FdPipeline fdp(fdc, tiny_geometry());
            ParamStore ps2;
            Rng r2(seed + 10);
            fdp.init(ps2, r2);
            auto s2 = to_train_scene(tiny_scene(seed + 20, 44));
            worst_e2e = std::max(worst_e2e, max_rel_pipeline_grad_error(fdp, ps2, s2));
        }
        double dt = seconds_since(t0);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "primitives %.2e, pipelines %.2e, %.1f s", worst_prim,
                      worst_e2e, dt);
        o.note(buf);
        if (worst_prim >= 1e-4) o.fail("primitive gradient error above 1e-4");
        if (worst_e2e >= 1e-3) o.fail("end-to-end gradient error above 1e-3");
        if (dt >= 120.0) o.fail("runtime above 2 min");
    });

    run_criterion(11, "trainability smoke test (overfit one scene, 200 steps)", [&](Outcome& o) {
        auto cfg = smoke_config();
        SceneSpec spec = dataset_scene_spec(777, 1, 0.2);
        Scene sc = simulate_scene(spec, ds.geometry);
        std::vector<TrainScene> scenes = {to_train_scene(sc)};

        auto run = [&]() {
            TdPipeline pipe(cfg, ds.geometry);
            ParamStore ps;
            Rng rng(cfg.seed);
            pipe.init(ps, rng);
            TrainConfig tc;
            tc.epochs = 200;
            return train_pipeline(pipe, ps, scenes, scenes, tc);
        };
        auto t0 = std::chrono::steady_clock::now();
        auto trace1 = run();
        auto trace2 = run();
        double dt = seconds_since(t0);

        bool identical = trace1.train_loss.size() == trace2.train_loss.size();
        for (std::size_t i = 0; identical && i < trace1.train_loss.size(); i++)
            identical = trace1.train_loss[i] == trace2.train_loss[i];
        // loss is -SI-SDR: improvement is first loss minus best loss
        double first = trace1.train_loss.front();
        double best = first;
        for (double v : trace1.train_loss) best = std::min(best, v);
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "SI-SDR %.2f -> %.2f dB (gain %.2f), 2 runs in %.0f s", -first, -best,
                      first - best, dt);
        o.note(buf);
        if (trace1.aborted_non_finite) o.fail("training aborted on non-finite loss");
        if (first - best < 3.0) o.fail("improvement below 3 dB");
        if (!identical) o.fail("seeded loss traces differ");
    });

    run_criterion(12, "beam-pattern sanity (MVDR null, TD frequency invariance)", [&](Outcome& o) {
        SceneSpec spec;
        spec.target_doa_deg = 60.0;
        spec.interferer_doa_deg = 120.0;
        spec.sir_db = 0.0;
        spec.seed = 99;
        spec.duration_s = 0.5;
        Scene sc = simulate_scene(spec, ds.geometry);

        auto w = oracle_fd_mvdr_weights(sc, FdSetup{});
        std::vector<double> thetas;
        for (int a = 0; a <= 180; a++) thetas.push_back(double(a));
        auto gains = beam_pattern_fd(w, ds.geometry, {1000.0}, thetas, 16000.0, 512);
        std::size_t best = 0;
        for (std::size_t a = 1; a < thetas.size(); a++)
            if (gains[a][0] < gains[best][0]) best = a;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "1 kHz minimum at %.0f deg (interferer 120)", thetas[best]);
        o.note(buf);
        if (std::fabs(thetas[best] - 120.0) > 10.0) o.fail("null not within 10 deg of interferer");

        // TD pattern: identical gains at matched steering products f*cos(theta)
        auto yf = frame(sc.mixture, TdSetup{}.grid);
        auto sf = frame(sc.target, TdSetup{}.grid);
        auto nf = frame(sc.interferer, TdSetup{}.grid);
        auto h = td_mvdr_steering(sf, 0);
        auto wtd = td_eq_mvdr_per_sample(nf, h, 0);
        auto w_spatial = average_spatial_weights(wtd);
        std::vector<double> psi;
        for (int i = 0; i <= 40; i++) psi.push_back(-900.0 + 45.0 * double(i));
        double worst = 0;
        std::vector<std::vector<double>> ref_gain;
        for (double f : {1000.0, 2000.0, 3000.0}) {
            std::vector<double> ths;
            for (double p : psi) ths.push_back(std::acos(p / f) * 180.0 / kPi);
            auto gtd = beam_pattern_td(w_spatial, ds.geometry, {f}, ths);
            if (ref_gain.empty())
                ref_gain = gtd;
            else
                for (std::size_t i = 0; i < gtd.size(); i++)
                    worst = std::max(worst, std::fabs(gtd[i][0] - ref_gain[i][0]));
        }
        std::snprintf(buf, sizeof(buf), "TD invariance deviation %.2e", worst);
        o.note(buf);
        if (worst >= 1e-9) o.fail("TD pattern varies across frequencies");
    });

    run_criterion(13, "head dimension conformance", [&](Outcome& o) {
        auto fd = nn::make_fd_head("fd", 8);
        auto td = nn::make_td_head("td", 8, 40);
        ParamStore ps;
        Rng rng(1);
        fd.init(ps, rng);
        td.init(ps, rng);
        auto shape_of = [&](const std::string& name) { return ps.at(name).shape; };
        using S = std::vector<std::size_t>;
        if (shape_of("fd.proj.W") != S{4 * 64, 180}) o.fail("fd projection not 4M^2 -> 180");
        if (shape_of("fd.gru1.U") != S{90, 270}) o.fail("fd gru width not 90");
        if (shape_of("fd.gru2.U") != S{90, 270}) o.fail("fd gru2 width not 90");
        if (shape_of("fd.out.W") != S{90, 16}) o.fail("fd output not 2M");
        if (shape_of("td.proj.W") != S{2 * 40 * 64, 32}) o.fail("td projection not 2NM^2 -> 32");
        if (shape_of("td.gru1.U") != S{256, 768}) o.fail("td gru width not 256");
        if (shape_of("td.gru2.U") != S{256, 768}) o.fail("td gru2 width not 256");
        if (shape_of("td.out.W") != S{256, 320}) o.fail("td output not N*M");
        o.note("FD 4M^2->180, GRU 90, out 2M; TD 2NM^2->32, GRU 256, out N*M");
    });

    std::filesystem::remove_all(tmp);
    if (g_failures == 0) {
        std::printf("acceptance: all 13 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
    return 1;
}
