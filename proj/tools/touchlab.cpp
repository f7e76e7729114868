// touchlab command-line front end.

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "touchlab/config.hpp"
#include "touchlab/corpus.hpp"
#include "touchlab/eval_bench.hpp"
#include "touchlab/keyboard.hpp"
#include "touchlab/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace touchlab;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

AppConfig load(const Globals& g) {
    AppConfig c = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
    if (g.seed) c.noise.rng_seed = *g.seed;
    c.validate();
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

void log(const Globals& g, const std::string& msg) {
    if (g.verbose) std::cerr << msg << '\n';
}

std::vector<sim::TaskKind> parse_tasks(const std::string& s) {
    if (s == "all") return {sim::TaskKind::Cross, sim::TaskKind::HLine, sim::TaskKind::VLine, sim::TaskKind::Circle};
    std::vector<sim::TaskKind> out;
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ',');) out.push_back(sim::task_from_string(t));
    return out;
}

std::vector<eval::Method> parse_methods(const std::string& s) {
    std::vector<eval::Method> out;
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ',');) out.push_back(eval::method_from_string(t));
    return out;
}

std::atomic<bool> g_interrupted{false};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"touchlab: depth-camera touch detection and finger designation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "JSON configuration file");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_flag("--verbose", g.verbose, "Progress on stderr");

    // gen-dataset
    auto* gen = app.add_subcommand("gen-dataset", "Render a labelled pose-grid dataset");
    std::string gen_out;
    sim::PoseGrid grid;
    std::vector<int> grid_axes;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--grid", grid_axes, "yaw,tilt,wrist,finger step counts")->delimiter(',')->expected(4);
    gen->add_option("--yaw", grid.yaw, "Yaw steps");
    gen->add_option("--tilt", grid.tilt, "Pitch/roll steps");
    gen->add_option("--wrist", grid.wrist, "Wrist placement steps");
    gen->add_option("--finger", grid.finger, "Finger presets");

    // gen-corpus
    auto* gc = app.add_subcommand("gen-corpus", "Write the replay corpus (background + scenario frames)");
    std::string gc_out, gc_hashes;
    gc->add_option("--out", gc_out, "Output directory")->required();
    gc->add_option("--hashes", gc_hashes, "Also write the frame hash list here");

    // export-heatmaps
    auto* ex = app.add_subcommand("export-heatmaps", "Write annotation heatmaps for a corpus or a rendered dataset");
    std::string ex_frames, ex_dataset, ex_out;
    double ex_sigma = 2.0;
    auto* ex_frames_opt = ex->add_option("--frames", ex_frames, "Corpus directory");
    ex->add_option("--dataset", ex_dataset, "Dataset directory holding manifest.json")->excludes(ex_frames_opt);
    ex->add_option("--out", ex_out, "Heatmap directory")->required();
    ex->add_option("--sigma", ex_sigma, "Gaussian sigma in heatmap cells");

    // replay
    auto* rp = app.add_subcommand("replay", "Run the pipeline over a recorded corpus");
    std::string rp_frames, rp_poser = "oracle", rp_heatmaps, rp_out;
    bool rp_timings = false;
    rp->add_option("--frames", rp_frames, "Corpus directory")->required();
    rp->add_option("--poser", rp_poser, "oracle | heatmaps")->check(CLI::IsMember({"oracle", "heatmaps"}));
    rp->add_option("--heatmaps", rp_heatmaps, "Heatmap directory for --poser heatmaps");
    rp->add_option("--out", rp_out, "results.jsonl (stdout when omitted)");
    rp->add_flag("--timings", rp_timings, "Include per-stage timings");

    // run-eval
    auto* ev = app.add_subcommand("run-eval", "Accuracy tasks and designation experiments");
    std::string ev_task = "all", ev_methods = "pose,naive", ev_out = "report.json", ev_csv;
    bool ev_designation = false;
    ev->add_option("--task", ev_task, "all | cross,hline,vline,circle");
    ev->add_option("--methods", ev_methods, "pose,naive");
    ev->add_option("--out", ev_out, "Report JSON");
    ev->add_option("--csv", ev_csv, "Raw samples as CSV");
    ev->add_flag("--designation", ev_designation, "Also run single-touch, multi-touch and robustness experiments");

    // keyboard-sim
    auto* kb = app.add_subcommand("keyboard-sim", "Scripted synthetic typist on the virtual keyboard");
    std::string kb_text, kb_layout, kb_words, kb_log;
    kb->add_option("--text", kb_text, "Reference text file")->required();
    kb->add_option("--layout", kb_layout, "Layout JSON (default QWERTY)");
    kb->add_option("--words", kb_words, "Word list enabling the prefix suggester");
    kb->add_option("--log", kb_log, "Session log (JSON lines)");

    // serve
    auto* sv = app.add_subcommand("serve", "WebSocket session service (protocol v=1)");
    std::string sv_host = "127.0.0.1";
    std::uint16_t sv_port = 8765;
    sv->add_option("--host", sv_host, "Bind address");
    sv->add_option("--port", sv_port, "Port; 0 picks a free one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const AppConfig cfg = load(g);
        const std::uint64_t seed = g.seed.value_or(1);

        if (*gen) {
            if (!grid_axes.empty()) grid = {grid_axes[0], grid_axes[1], grid_axes[2], grid_axes[3]};
            const auto m = sim::generate_dataset(grid, cfg.scene, cfg.noise, gen_out);
            std::cout << "wrote " << m.sample_ids.size() << " samples to " << gen_out << '\n';
        } else if (*gc) {
            const auto c = corpus::generate_corpus(g.seed.value_or(corpus::kDefaultSeed), cfg.scene, cfg.noise);
            corpus::save_corpus(gc_out, c);
            if (!gc_hashes.empty()) write_text(gc_hashes, corpus::hash_list(c));
            std::cout << "wrote " << c.background.size() << " background and " << c.frames.size() << " frames to "
                      << gc_out << '\n';
        } else if (*ex) {
            if (ex_frames.empty() == ex_dataset.empty())
                throw Error(ErrorCode::ConfigError, "export-heatmaps needs exactly one of --frames or --dataset");
            const int n = ex_dataset.empty()
                              ? corpus::export_heatmaps(corpus::load_corpus(ex_frames), cfg.pipeline, cfg.background,
                                                        ex_out, ex_sigma)
                              : corpus::export_dataset_heatmaps(ex_dataset, cfg.scene, cfg.pipeline, ex_out, ex_sigma);
            std::cout << "wrote " << n << " heatmap stacks to " << ex_out << '\n';
        } else if (*rp) {
            const auto c = corpus::load_corpus(rp_frames);
            std::unique_ptr<pose::Poser> poser;
            if (rp_poser == "oracle") {
                poser = std::make_unique<pose::OraclePoser>(cfg.poser.sigma_joint_px, cfg.noise.rng_seed);
            } else {
                if (rp_heatmaps.empty()) throw Error(ErrorCode::ConfigError, "--poser heatmaps needs --heatmaps DIR");
                poser = std::make_unique<pose::HeatmapFilePoser>(rp_heatmaps, cfg.poser.fitness_threshold, cfg.angles);
            }
            const auto lines = corpus::replay(c, *poser, cfg.pipeline, cfg.background, rp_timings);
            std::string text;
            for (const auto& l : lines) text += l + '\n';
            if (rp_out.empty())
                std::cout << text;
            else
                write_text(rp_out, text);
            log(g, "replayed " + std::to_string(lines.size()) + " frames");
        } else if (*ev) {
            eval::EvalConfig ec;
            ec.scene = cfg.scene;
            ec.noise = cfg.noise;
            ec.background = cfg.background;
            ec.pipeline = cfg.pipeline;
            ec.seed = seed;
            const auto t0 = std::chrono::steady_clock::now();
            const eval::Bench bench(ec);
            const auto tasks = parse_tasks(ev_task);
            const auto methods = parse_methods(ev_methods);
            std::vector<eval::AccuracyReport> all, pose_reports, naive_reports;
            json report;
            report["seed"] = seed;
            report["config"] = to_json(cfg);
            report["tasks"] = json::array();
            for (auto task : tasks) {
                for (auto m : methods) {
                    log(g, std::string("task ") + std::string(sim::to_string(task)) + " / " +
                               std::string(eval::to_string(m)));
                    auto r = bench.run_task(task, m);
                    report["tasks"].push_back(eval::to_json(r));
                    (m == eval::Method::PoseAware ? pose_reports : naive_reports).push_back(r);
                    all.push_back(std::move(r));
                }
            }
            if (!pose_reports.empty() && pose_reports.size() == naive_reports.size())
                report["comparison"] = eval::to_json(eval::compare_methods(pose_reports, naive_reports));
            if (ev_designation) {
                log(g, "single-touch designation");
                report["single_touch"] = {{"instructed", eval::to_json(bench.run_single_touch(20, true))},
                                          {"uninstructed", eval::to_json(bench.run_single_touch(20, false))}};
                log(g, "multi-touch designation");
                report["multi_touch"] = eval::to_json(bench.run_multi_touch(10));
                report["pressed_together"] = eval::to_json(bench.run_pressed_together(200));
                report["thumb_dropout"] = eval::to_json(bench.run_thumb_dropout(100));
                int kept = 0;
                for (int s = 0; s < 100; ++s) kept += eval::anti_swap_trial(derive_seed(seed, 0xa5 + s), cfg.pipeline.match);
                report["anti_swap"] = {{"trials", 100}, {"kept", kept}};
            }
            report["elapsed_s"] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            write_text(ev_out, report.dump(2) + '\n');
            if (!ev_csv.empty()) write_text(ev_csv, eval::to_csv(all));
            for (const auto& r : all) {
                std::cout << sim::to_string(r.task) << ' ' << eval::to_string(r.method) << " mean " << r.mean
                          << " mm (se " << r.std_error << ", n " << r.errors_mm.size() << ", misses " << r.misses
                          << ")\n";
            }
        } else if (*kb) {
            std::ifstream in(kb_text);
            if (!in) throw Error(ErrorCode::IoError, "cannot read " + kb_text);
            std::stringstream ss;
            ss << in.rdbuf();
            std::string text = ss.str();
            while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
            for (auto& ch : text) {
                if (ch == '\n' || ch == '\r' || ch == '\t') ch = ' ';
            }
            const auto layout = kb_layout.empty() ? keyboard::KeyLayout::qwerty() : keyboard::load_layout(kb_layout);
            std::unique_ptr<keyboard::Suggester> suggester;
            if (kb_words.empty())
                suggester = std::make_unique<keyboard::NullSuggester>();
            else
                suggester = std::make_unique<keyboard::PrefixSuggester>(keyboard::PrefixSuggester::from_file(kb_words));
            keyboard::TypistConfig tc;
            tc.seed = seed;
            const auto session = keyboard::run_typist(text, layout, *suggester, tc, cfg.pipeline, cfg.scene, cfg.noise);
            if (!kb_log.empty()) {
                std::string lines;
                for (const auto& e : session.log) lines += keyboard::to_json(e).dump() + '\n';
                write_text(kb_log, lines);
            }
            std::cout << json{{"reference", session.reference},
                              {"emitted", session.emitted},
                              {"wpm", keyboard::wpm(session)},
                              {"cer", keyboard::cer(session.reference, session.emitted)},
                              {"keystrokes", session.log.size()}}
                             .dump(2)
                      << '\n';
        } else if (*sv) {
            service::Server server(sv_host, sv_port, cfg);
            const auto port = server.start();
            std::cout << "listening on " << sv_host << ':' << port << std::endl;
            std::signal(SIGINT, [](int) { g_interrupted = true; });
            std::signal(SIGTERM, [](int) { g_interrupted = true; });
            while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::EmptyGrid ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
