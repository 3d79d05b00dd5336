// jcep: experiment runner.
//
//   jcep spectrum|evolve|classify|sweep --config <file> [--out <dir>]
//        [--workers N] [--seed-label <string>]
//
// Output directory: --out, else $JCEP_OUT, else output.directory.
// Exit codes: 0 ok, 2 config, 3 geometry, 4 integrator, 5 expectation
// mismatch, 1 anything else.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "jcep/jcep.hpp"

namespace fs = std::filesystem;
using namespace jcep;

namespace {

enum Exit { ok = 0, other = 1, config_error = 2, geometry_error = 3, integrator_error = 4, expectation_mismatch = 5 };

struct RunOptions {
    ExperimentConfig cfg;
    fs::path out;
    fs::path config_dir;
    unsigned workers = 1;
    std::string seed_label;
};

void write_file(const fs::path& p, const std::string& content)
{
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write '" + p.string() + "'");
    f << content;
}

template <class F>
std::string render(F&& body)
{
    std::ostringstream s;
    body(s);
    return s.str();
}

ojson label_field(const RunOptions& o) { return o.seed_label.empty() ? ojson(nullptr) : ojson(o.seed_label); }

LoopBlock resolved_loop(const RunOptions& o)
{
    LoopBlock lb = *o.cfg.loop;
    if (lb.kind == LoopKind::custom && fs::path(lb.custom_csv).is_relative())
        lb.custom_csv = (o.config_dir / lb.custom_csv).string();
    return lb;
}

// Runs `jobs` on up to `workers` threads; rethrows the first failure in job order.
void run_parallel(std::size_t jobs, unsigned workers, const std::function<void(std::size_t)>& job)
{
    std::vector<std::exception_ptr> errors(jobs);
    std::mutex m;
    std::size_t next = 0;
    auto worker = [&] {
        while (true) {
            std::size_t k;
            {
                std::lock_guard<std::mutex> lock(m);
                if (next >= jobs) return;
                k = next++;
            }
            try {
                job(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs))); ++w)
        pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------

int cmd_spectrum(const RunOptions& o)
{
    if (!o.cfg.grid) throw ConfigError("spectrum needs a [grid] block");
    const GridBlock& gb = *o.cfg.grid;
    const GridSpec& g = gb.spec;
    const SurfaceSample s = sample_surface(g, o.workers);

    ojson report;
    report["label"] = label_field(o);
    report["grid"] = to_json(g);

    if (o.cfg.output.csv) write_file(o.out / "surface.csv", render([&](std::ostream& f) { write_surface_csv(f, s); }));
    if (o.cfg.output.binary)
        write_file(o.out / "surface.bin", render([&](std::ostream& f) { write_surface_binary(f, s); }));

    const MinGap mg = locate_min_gap(s);
    report["min_gap"] = to_json(mg, g);

    ojson levels = ojson::object();
    std::optional<LevelSet> d_line, l_line;
    for (LevelKind k : {LevelKind::d_line, LevelKind::l_line}) {
        ojson entry;
        try {
            LevelSet ls = degeneracy_lines(s, k);
            entry = {{"empty", false}, {"polylines", ls.segments.size()}, {"vertices", ls.vertex_count()}};
            if (o.cfg.output.csv)
                write_file(o.out / (k == LevelKind::d_line ? "d_line.csv" : "l_line.csv"),
                           render([&](std::ostream& f) { write_level_set_csv(f, ls, g); }));
            (k == LevelKind::d_line ? d_line : l_line) = std::move(ls);
        } catch (const EmptyLevelSet&) {
            entry = {{"empty", true}, {"polylines", 0}, {"vertices", 0}};
        }
        levels[std::string(to_string(k))] = entry;
    }
    if (d_line && l_line) {
        const double dist = level_set_distance(*d_line, *l_line);
        levels["min_separation"] = dist;
        levels["disjoint"] = dist > 0.0;
    } else {
        levels["min_separation"] = nullptr;
        levels["disjoint"] = nullptr;
    }
    report["level_sets"] = levels;

    std::optional<Loop> loop;
    if (o.cfg.loop) loop = resolved_loop(o).build(o.cfg.loop->directions.front(), o.cfg.model);

    if (gb.reference) {
        const Point2 r = *gb.reference;
        ojson ref{{"point", {r[0], r[1]}}, {"gap", std::abs(eigenvalue_gap(g.slice.at(r[0], r[1])))}};
        ref["distance_to_min_gap"] = std::hypot(r[0] - mg.x, r[1] - mg.y);
        if (loop) {
            try {
                const Encirclement e = encirclement_diagnostic(*loop, r, g.slice.axis_x, g.slice.axis_y);
                ref["winding_number"] = e.winding_number;
                ref["loop_distance"] = e.min_distance;
            } catch (const ReferenceOnPath&) {
                // winding is undefined when the loop passes through the point
                ref["winding_number"] = nullptr;
                ref["loop_distance"] = 0.0;
            }
        }
        report["reference"] = ref;
    } else {
        report["reference"] = nullptr;
    }

    if (loop) {
        const auto pts = project_loop(g, *loop, gb.overlay_samples);
        if (o.cfg.output.csv)
            write_file(o.out / "overlay.csv", render([&](std::ostream& f) { write_projection_csv(f, pts, g); }));
        ojson ov{{"loop", to_json(*loop)}};
        try {
            const Encirclement e = encirclement_diagnostic(*loop, {mg.x, mg.y}, g.slice.axis_x, g.slice.axis_y);
            ov["winding_around_min_gap"] = e.winding_number;
            ov["distance_to_min_gap"] = e.min_distance;
        } catch (const ReferenceOnPath&) {
            ov["winding_around_min_gap"] = nullptr;
            ov["distance_to_min_gap"] = 0.0;
        }
        report["overlay"] = ov;
    }

    if (gb.cut_axis) {
        const bool along_x = *gb.cut_axis == g.slice.axis_y;
        const Param along = along_x ? g.slice.axis_x : g.slice.axis_y;
        const auto pts = along_x ? sample_cut(g.slice, true, gb.cut_value, g.x_min, g.x_max, gb.cut_samples)
                                 : sample_cut(g.slice, false, gb.cut_value, g.y_min, g.y_max, gb.cut_samples);
        if (o.cfg.output.csv)
            write_file(o.out / "cut.csv", render([&](std::ostream& f) { write_cut_csv(f, pts, along); }));
        report["cut"] = {{"fixed_axis", to_string(*gb.cut_axis)},
                         {"fixed_value", gb.cut_value},
                         {"along", to_string(along)},
                         {"note", "single slice at the given value"}};
    }

    if (o.cfg.output.json) write_file(o.out / "spectrum.json", render([&](std::ostream& f) { write_json(f, report); }));
    if (o.cfg.output.scripts) write_file(o.out / "plot_spectrum.py", spectrum_plot_script());
    return ok;
}

// ---------------------------------------------------------------------------

struct EvolveResult {
    std::vector<Label> initial;
    std::vector<Direction> directions;
    std::vector<EvolutionRecord> records;  // initial-major

    const EvolutionRecord& at(Label l, Direction d) const
    {
        for (std::size_t a = 0; a < initial.size(); ++a)
            for (std::size_t b = 0; b < directions.size(); ++b)
                if (initial[a] == l && directions[b] == d) return records[a * directions.size() + b];
        throw Error("record not available");
    }
};

std::string record_name(Label l, Direction d)
{
    return "record_" + std::string(to_string(l)) + "_" + std::string(to_string(d)) + ".csv";
}

EvolveResult run_evolve(const ExperimentConfig& cfg, const LoopBlock& lb, const fs::path& out, unsigned workers)
{
    EvolveResult r{lb.initial, lb.directions, {}};
    r.records.resize(r.initial.size() * r.directions.size());
    run_parallel(r.records.size(), workers, [&](std::size_t k) {
        const Label l = r.initial[k / r.directions.size()];
        const Direction d = r.directions[k % r.directions.size()];
        const Loop loop = lb.build(d, cfg.model);
        r.records[k] = evolve(loop, initial_bell_state(l), cfg.integrator);
        if (cfg.output.csv)
            write_file(out / record_name(l, d), render([&](std::ostream& f) { write_record_csv(f, r.records[k]); }));
    });
    return r;
}

ojson integrator_json(const IntegratorConfig& ic)
{
    ojson j{{"scheme", to_string(ic.scheme)}, {"observations", ic.observations}, {"rescale", ic.rescale},
            {"fidelity", to_string(ic.fidelity)}, {"labels", to_string(ic.labels)},
            {"normalization", to_string(ic.normalization)}, {"ep_crossing", to_string(ic.ep_crossing)}};
    if (ic.scheme == Scheme::rk4) j["steps"] = ic.steps;
    else j["tolerances"] = {{"rtol", ic.rtol}, {"atol", ic.atol}, {"min_step", ic.min_step}};
    return j;
}

int cmd_evolve(const RunOptions& o)
{
    if (!o.cfg.loop) throw ConfigError("evolve needs a [loop] block");
    const LoopBlock lb = resolved_loop(o);
    const EvolveResult r = run_evolve(o.cfg, lb, o.out, o.workers);

    ojson runs = ojson::array();
    for (std::size_t a = 0; a < r.initial.size(); ++a)
        for (std::size_t b = 0; b < r.directions.size(); ++b) {
            const EvolutionRecord& rec = r.records[a * r.directions.size() + b];
            runs.push_back({{"initial", to_string(r.initial[a])},
                            {"direction", to_string(r.directions[b])},
                            {"file", record_name(r.initial[a], r.directions[b])},
                            {"final_F_plus", rec.fidelity_plus.back()},
                            {"final_F_minus", rec.fidelity_minus.back()},
                            {"final_log_norm", rec.log_norm.back()}});
        }
    ojson report{{"label", label_field(o)},
                 {"loop", to_json(lb.build(r.directions.front(), o.cfg.model))},
                 {"integrator", integrator_json(o.cfg.integrator)},
                 {"runs", runs}};
    if (o.cfg.output.json) write_file(o.out / "evolve.json", render([&](std::ostream& f) { write_json(f, report); }));
    if (o.cfg.output.scripts) write_file(o.out / "plot_evolve.py", evolve_plot_script());
    return ok;
}

// ---------------------------------------------------------------------------

struct ClassifyOutcome {
    ojson report;
    std::vector<TransferVerdict> verdicts;
    bool expectation_met = true;
};

ClassifyOutcome run_classify(const ExperimentConfig& cfg, const LoopBlock& lb, const fs::path& out, unsigned workers,
                             const ojson& label)
{
    bool has_cw = false, has_ccw = false;
    for (Direction d : lb.directions) (d == Direction::cw ? has_cw : has_ccw) = true;
    if (!has_cw || !has_ccw) throw ConfigError("classify needs both directions in loop.directions");

    const EvolveResult r = run_evolve(cfg, lb, out, workers);
    ClassifyOutcome c;
    ojson verdicts = ojson::array();
    for (Label l : lb.initial) {
        c.verdicts.push_back(classify_transfer(r.at(l, Direction::cw), r.at(l, Direction::ccw), cfg.analysis.threshold));
        verdicts.push_back(to_json(c.verdicts.back()));
        if (cfg.analysis.expect && c.verdicts.back().transfer_class != *cfg.analysis.expect) c.expectation_met = false;
    }

    ojson stability = ojson::array();
    for (double th : cfg.analysis.stability_thresholds) {
        ojson classes = ojson::object();
        for (Label l : lb.initial)
            classes[std::string(to_string(l))] =
                to_string(classify_transfer(r.at(l, Direction::cw), r.at(l, Direction::ccw), th).transfer_class);
        stability.push_back({{"threshold", th}, {"class", classes}});
    }

    const Loop ccw = lb.build(Direction::ccw, cfg.model);
    ojson metrics;
    try {
        metrics = to_json(adiabaticity_metrics(ccw, cfg.analysis.adiabatic_samples));
    } catch (const DegenerateEigensystem& e) {
        metrics = {{"error", e.what()}};
    }

    c.report = {{"label", label},
                {"loop", to_json(ccw)},
                {"directions", {"cw", "ccw"}},
                {"integrator", integrator_json(cfg.integrator)},
                {"threshold", cfg.analysis.threshold},
                {"verdicts", verdicts},
                {"threshold_stability", stability},
                {"adiabaticity", metrics}};
    c.report["expect"] = cfg.analysis.expect ? ojson(to_string(*cfg.analysis.expect)) : ojson(nullptr);
    c.report["expectation_met"] = cfg.analysis.expect ? ojson(c.expectation_met) : ojson(nullptr);
    if (cfg.output.json) write_file(out / "verdict.json", render([&](std::ostream& f) { write_json(f, c.report); }));
    if (cfg.output.scripts) write_file(out / "plot_evolve.py", evolve_plot_script());
    return c;
}

int cmd_classify(const RunOptions& o)
{
    if (!o.cfg.loop) throw ConfigError("classify needs a [loop] block");
    const ClassifyOutcome c = run_classify(o.cfg, resolved_loop(o), o.out, o.workers, label_field(o));
    for (const auto& v : c.verdicts)
        std::cout << "initial=" << to_string(v.initial) << " cw=" << to_string(v.cw_map)
                  << " ccw=" << to_string(v.ccw_map) << " class=" << to_string(v.transfer_class) << '\n';
    if (!c.expectation_met) {
        std::cerr << "expected class " << to_string(*o.cfg.analysis.expect) << '\n';
        return expectation_mismatch;
    }
    return ok;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const RunOptions& o)
{
    if (!o.cfg.sweep) throw ConfigError("sweep needs a [sweep] block");
    if (!o.cfg.loop) throw ConfigError("sweep needs a [loop] block");
    const SweepBlock& sb = *o.cfg.sweep;
    const LoopBlock base = resolved_loop(o);

    std::vector<ClassifyOutcome> results(sb.values.size());
    run_parallel(sb.values.size(), o.workers, [&](std::size_t k) {
        ExperimentConfig cfg = o.cfg;
        LoopBlock lb = base;
        if (sb.parameter == "threshold") {
            cfg.analysis.threshold = sb.values[k];
        } else {
            for (const auto& [name, field] : detail::loop_constant_fields())
                if (name == sb.parameter) lb.constants.*field = name == "omega" ? std::abs(sb.values[k]) : sb.values[k];
            if (sb.parameter == "omega" && !(lb.constants.omega > 0.0))
                throw ConfigError("key 'sweep.values': omega must be non-zero");
        }
        results[k] = run_classify(cfg, lb, o.out / ("run_" + std::to_string(k)), 1, label_field(o));
    });

    bool all_met = true;
    ojson rows = ojson::array();
    std::ostringstream table;
    table << sb.parameter << ",initial,cw_map,ccw_map,class,cw_plus,cw_minus,ccw_plus,ccw_minus\n";
    for (std::size_t k = 0; k < sb.values.size(); ++k) {
        all_met = all_met && results[k].expectation_met;
        for (const auto& v : results[k].verdicts) {
            const auto& f = v.endpoint_fidelities;
            table << fmt17(sb.values[k]) << ',' << to_string(v.initial) << ',' << to_string(v.cw_map) << ','
                  << to_string(v.ccw_map) << ',' << to_string(v.transfer_class) << ',' << fmt17(f.cw_plus) << ','
                  << fmt17(f.cw_minus) << ',' << fmt17(f.ccw_plus) << ',' << fmt17(f.ccw_minus) << '\n';
        }
        rows.push_back({{"value", sb.values[k]}, {"directory", "run_" + std::to_string(k)},
                        {"verdicts", results[k].report["verdicts"]}});
    }
    if (o.cfg.output.csv) write_file(o.out / "sweep.csv", table.str());
    ojson report{{"label", label_field(o)}, {"parameter", sb.parameter}, {"runs", rows}};
    if (o.cfg.output.json) write_file(o.out / "sweep.json", render([&](std::ostream& f) { write_json(f, report); }));
    return all_met ? ok : expectation_mismatch;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dissipative Jaynes-Cummings loop experiments"};
    app.require_subcommand(1);
    std::string config_path, out_dir, seed_label;
    unsigned workers = 1;
    std::vector<std::pair<std::string, int (*)(const RunOptions&)>> commands{
        {"spectrum", cmd_spectrum}, {"evolve", cmd_evolve}, {"classify", cmd_classify}, {"sweep", cmd_sweep}};
    std::vector<CLI::App*> subs;
    for (const auto& [name, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_option("--seed-label", seed_label, "label recorded in reports");
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : config_error;
    }

    try {
        RunOptions o;
        o.cfg = load_config(config_path);
        o.config_dir = fs::path(config_path).parent_path();
        if (!out_dir.empty()) o.out = out_dir;
        else if (const char* env = std::getenv("JCEP_OUT"); env && *env) o.out = env;
        else o.out = o.cfg.output.directory;
        o.workers = workers;
        o.seed_label = seed_label;
        for (std::size_t k = 0; k < subs.size(); ++k)
            if (subs[k]->parsed()) return commands[k].second(o);
        return other;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const InvalidParameters& e) {
        std::cerr << "invalid parameters: " << e.what() << '\n';
        return config_error;
    } catch (const PlaneMismatch& e) {
        std::cerr << "geometry error: " << e.what() << '\n';
        return geometry_error;
    } catch (const ReferenceOnPath& e) {
        std::cerr << "geometry error: " << e.what() << '\n';
        return geometry_error;
    } catch (const InvalidLoop& e) {
        std::cerr << "geometry error: " << e.what() << '\n';
        return geometry_error;
    } catch (const StepUnderflow& e) {
        std::cerr << "integrator error: " << e.what() << '\n';
        return integrator_error;
    } catch (const DegenerateEigensystem& e) {
        std::cerr << "integrator error: " << e.what() << '\n';
        return integrator_error;
    } catch (const AmbiguousAssignment& e) {
        std::cerr << "integrator error: " << e.what() << '\n';
        return integrator_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other;
    }
}
