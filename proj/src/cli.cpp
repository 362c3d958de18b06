#include "csd/cli.hpp"

#include "csd/assess.hpp"
#include "csd/betafit.hpp"
#include "csd/common.hpp"
#include "csd/csd1.hpp"
#include "csd/csd2.hpp"
#include "csd/ingest.hpp"
#include "csd/svm.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace csd::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatsHelp = R"(Formats (all version 1):
  corpus       JSON Lines {"id", "sentences": [...]} or {"id", "text"}; optional "scores", "label"
  embeddings   JSON Lines {"id", "model", "dim", "vectors"} or binary records
               "CSDE" u32 version, u32 dim, u32 count, count*dim float32 (little-endian, corpus order)
  curves       CSV "x,y" (17 significant digits) or JSON with metadata (.json extension)
  features     JSON Lines {"id", "features": [90 values], "label"}
  predictions  JSON Lines {"id", "pred", "label"}
  model        JSON {"format": "csd-svm", "version": 1, ...})";

struct Common {
    std::uint64_t seed = 42;
    unsigned jobs = default_jobs();
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Per-article seed: independent of thread count and of which other
// articles are processed.
std::uint64_t article_seed(std::uint64_t seed, const std::string& id) {
    std::uint64_t h = seed;
    for (unsigned char c : id) h = splitmix64(h ^ c);
    return splitmix64(h);
}

std::string file_stem_for(const std::string& id) {
    std::string out;
    for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
    return out.empty() ? "article" : out;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("expected a comma-separated number list, got '" + text + "'");
        }
    }
    if (out.empty()) throw CLI::ValidationError("empty number list");
    return out;
}

std::vector<double> expand_lists(const std::vector<std::string>& items) {
    std::vector<double> out;
    for (const auto& s : items) {
        auto part = parse_number_list(s);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

struct EmbeddingSource {
    std::string embeddings;
    std::string provider_url;
};

void add_embedding_flags(CLI::App* cmd, EmbeddingSource& src) {
    cmd->add_option("--embeddings", src.embeddings, "Embedding file (text or binary); doubles as cache with --provider-url")
        ->required();
    cmd->add_option("--provider-url", src.provider_url,
                    "Fetch embeddings missing from the cache file from this provider (text cache only)");
}

EmbeddingStore obtain_embeddings(const CorpusFile& corpus, const EmbeddingSource& src, unsigned jobs, std::ostream& err) {
    if (src.provider_url.empty()) return load_embeddings(src.embeddings, &corpus);
    EmbeddingStore store;
    if (fs::exists(src.embeddings)) store = load_embeddings(src.embeddings);
    std::size_t fetched = fetch_missing({src.provider_url}, corpus.articles, store, jobs);
    if (fetched > 0) {
        save_embeddings(store, src.embeddings, EmbeddingFormat::text);
        err << "fetched embeddings for " << fetched << " article(s)\n";
    }
    check_store_covers(store, corpus);
    return store;
}

std::vector<const Article*> select_articles(const CorpusFile& corpus, const std::vector<std::string>& ids) {
    std::vector<const Article*> out;
    if (ids.empty()) {
        for (const auto& a : corpus.articles) out.push_back(&a);
    } else {
        for (const auto& id : ids) out.push_back(&corpus.find(id));
    }
    return out;
}

std::optional<double> record_label(const CorpusFile& corpus, std::size_t i) {
    if (corpus.labels[i]) return corpus.labels[i];
    if (!corpus.scores[i].empty()) return merge_scores(corpus.scores[i]);
    return std::nullopt;
}

struct FeatureRecord {
    std::string id;
    std::vector<double> values;
    std::optional<double> label;
};

std::vector<FeatureRecord> read_feature_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    std::vector<FeatureRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            FeatureRecord r;
            r.id = j.at("id").get<std::string>();
            r.values = j.at("features").get<std::vector<double>>();
            if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<double>();
            if (!out.empty() && r.values.size() != out.front().values.size()) {
                throw DataError("feature dimension differs from the first record");
            }
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (out.empty()) throw DataError(path.string() + ": no feature records");
    return out;
}

std::string feature_line(const FeatureRecord& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["features"] = r.values;
    j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
    return j.dump() + "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Content-significance distributions of articles: CSD-1/CSD-2 curves, beta-curve fits, "
                 "and organization grading."};
    app.footer(kFormatsHelp);
    app.require_subcommand(1);
    Common common;
    app.add_option("--seed", common.seed, "Random seed (logged by every randomized subcommand)")->capture_default_str();
    app.add_option("--jobs", common.jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);

    std::function<void()> action;

    // csd1 ------------------------------------------------------------------
    struct {
        std::string corpus, out_dir, format = "csv", blocks = "5000+5000";
        EmbeddingSource emb;
        std::vector<std::string> size_fracs{"0.3"}, articles;
        bool exact = false;
        std::uint64_t cap = 200000;
    } c1;
    auto* csd1_cmd = app.add_subcommand("csd1", "CSD-1 curves (sorted block MoverScores) per article and block size");
    csd1_cmd->add_option("--corpus", c1.corpus, "Corpus JSON Lines file")->required();
    add_embedding_flags(csd1_cmd, c1.emb);
    csd1_cmd->add_option("--size-frac", c1.size_fracs, "Block size fractions c (k = max(1, floor(c*n))); comma list")
        ->capture_default_str();
    csd1_cmd->add_flag("--exact", c1.exact, "Enumerate all blocks instead of sampling");
    csd1_cmd->add_option("--blocks", c1.blocks, "Uniform+stratified sample counts for the approximation")
        ->capture_default_str();
    csd1_cmd->add_option("--cap", c1.cap, "Maximum blocks for exact enumeration")->capture_default_str();
    csd1_cmd->add_option("--article", c1.articles, "Restrict to these article ids");
    csd1_cmd->add_option("--format", c1.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    csd1_cmd->add_option("--out-dir", c1.out_dir, "Output directory (<id>_k<k>.<format>)")->required();
    csd1_cmd->callback([&] {
        action = [&] {
            CorpusFile corpus = load_corpus(c1.corpus);
            EmbeddingStore store = obtain_embeddings(corpus, c1.emb, common.jobs, err);
            Csd1Options opts;
            opts.jobs = common.jobs;
            opts.enumeration_cap = c1.cap;
            auto plus = c1.blocks.find('+');
            try {
                if (plus == std::string::npos) throw std::invalid_argument(c1.blocks);
                opts.n_uniform = std::stoull(c1.blocks.substr(0, plus));
                opts.n_stratified = std::stoull(c1.blocks.substr(plus + 1));
            } catch (const std::exception&) {
                throw CLI::ValidationError("--blocks expects U+S, e.g. 5000+5000");
            }
            const auto fracs = expand_lists(c1.size_fracs);
            if (!c1.exact) err << "seed=" << common.seed << "\n";
            const auto ext = c1.format == "json" ? CurveFormat::json : CurveFormat::csv;
            for (const Article* a : select_articles(corpus, c1.articles)) {
                const auto& emb = store.get(a->id());
                for (double c : fracs) {
                    if (!(c > 0.0 && c <= 1.0)) throw DomainError("size fractions must lie in (0, 1]");
                    const std::size_t k = block_size_for_fraction(c, a->size());
                    CsdCurve curve = c1.exact ? csd1_exact(*a, emb, k, opts)
                                              : csd1_approx(*a, emb, k, article_seed(common.seed, a->id()), opts);
                    auto path = fs::path(c1.out_dir) / (file_stem_for(a->id()) + "_k" + std::to_string(k) + "." + c1.format);
                    write_curve(curve, path, ext);
                    out << path.string() << "\t" << curve.sample_count << " blocks\t" << to_string(curve.mode) << "\n";
                }
            }
        };
    });

    // csd2 ------------------------------------------------------------------
    struct {
        std::string corpus, out_dir, format = "csv";
        EmbeddingSource emb;
        std::vector<std::string> articles;
    } c2;
    auto* csd2_cmd = app.add_subcommand("csd2", "CSD-2 (top 30% sentence significance by position) per article");
    csd2_cmd->add_option("--corpus", c2.corpus, "Corpus JSON Lines file")->required();
    add_embedding_flags(csd2_cmd, c2.emb);
    csd2_cmd->add_option("--article", c2.articles, "Restrict to these article ids");
    csd2_cmd->add_option("--format", c2.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    csd2_cmd->add_option("--out-dir", c2.out_dir, "Output directory (<id>_csd2.<format>)")->required();
    csd2_cmd->callback([&] {
        action = [&] {
            CorpusFile corpus = load_corpus(c2.corpus);
            EmbeddingStore store = obtain_embeddings(corpus, c2.emb, common.jobs, err);
            auto articles = select_articles(corpus, c2.articles);
            std::vector<Csd2Curve> curves(articles.size());
            parallel_for(articles.size(), common.jobs,
                         [&](std::size_t i) { curves[i] = csd2_curve(*articles[i], store.get(articles[i]->id())); });
            for (const auto& curve : curves) {
                auto path = fs::path(c2.out_dir) / (file_stem_for(curve.article_id) + "_csd2." + c2.format);
                write_csd2(curve, path, c2.format == "json" ? CurveFormat::json : CurveFormat::csv);
                out << path.string() << "\n";
            }
        };
    });

    // segments --------------------------------------------------------------
    struct {
        std::vector<std::string> curves;
        std::string out_path;
    } sg;
    auto* seg_cmd = app.add_subcommand("segments", "Detect L/M/R segment boundaries of CSD-1 curves");
    seg_cmd->add_option("curves", sg.curves, "Curve files (.csv or .json)")->required();
    seg_cmd->add_option("--out", sg.out_path, "Write JSON Lines here instead of stdout");
    seg_cmd->callback([&] {
        action = [&] {
            std::string text;
            for (const auto& p : sg.curves) {
                Segments s = detect_segments(read_curve(p));
                nlohmann::json j{{"curve", p}, {"l_end", s.l_end}, {"r_start", s.r_start},
                                 {"degenerate", s.degenerate}, {"low_confidence", s.low_confidence}};
                text += j.dump() + "\n";
            }
            if (sg.out_path.empty()) out << text;
            else write_text_file(sg.out_path, text);
        };
    });

    // aggregate -------------------------------------------------------------
    struct {
        std::vector<std::string> inputs;
        std::string stat = "mean", kind = "csd1", out_path;
    } ag;
    auto* agg_cmd = app.add_subcommand("aggregate", "Pointwise mean/median of curves on the grid x = j/100");
    agg_cmd->add_option("inputs", ag.inputs, "Curve files")->required();
    agg_cmd->add_option("--stat", ag.stat, "mean or median")->check(CLI::IsMember({"mean", "median"}))->capture_default_str();
    agg_cmd->add_option("--kind", ag.kind, "csd1 or csd2")->check(CLI::IsMember({"csd1", "csd2"}))->capture_default_str();
    agg_cmd->add_option("--out", ag.out_path, "Output curve (.csv or .json)")->required();
    agg_cmd->callback([&] {
        action = [&] {
            const Statistic stat = statistic_from_string(ag.stat);
            const auto fmt = curve_format_from_path(ag.out_path);
            if (ag.kind == "csd1") {
                std::vector<CsdCurve> curves;
                for (const auto& p : ag.inputs) curves.push_back(read_curve(p));
                CsdCurve result = aggregate_curves(curves, stat);
                write_curve(result, ag.out_path, fmt);
                out << ag.out_path << "\t" << result.members << " curves\n";
            } else {
                std::vector<Csd2Curve> curves;
                for (const auto& p : ag.inputs) curves.push_back(read_csd2(p));
                Csd2Grid grid = aggregate_csd2(curves, stat);
                write_csd2_grid(grid, ag.out_path, fmt);
                out << ag.out_path << "\t" << grid.members << " curves\n";
            }
        };
    });

    // fit-beta --------------------------------------------------------------
    struct {
        std::vector<std::string> curves;
        std::string out_path;
    } fb;
    auto* fit_cmd = app.add_subcommand("fit-beta", "Fit LC_x(a,b|alpha,beta) = a*(1 - I_x(alpha,beta)) + b to curves");
    fit_cmd->add_option("curves", fb.curves, "Curve files (.csv or .json)")->required();
    fit_cmd->add_option("--out", fb.out_path, "Write JSON Lines here instead of stdout");
    fit_cmd->callback([&] {
        action = [&] {
            std::vector<LcFit> fits(fb.curves.size());
            std::vector<CsdCurve> curves;
            for (const auto& p : fb.curves) curves.push_back(read_curve(p));
            parallel_for(curves.size(), common.jobs, [&](std::size_t i) { fits[i] = fit_lc(curves[i]); });
            std::string text;
            for (std::size_t i = 0; i < fits.size(); ++i) {
                const auto& f = fits[i];
                nlohmann::json j{{"curve", fb.curves[i]}, {"a", f.params.a}, {"b", f.params.b},
                                 {"alpha", f.params.alpha}, {"beta", f.params.beta}, {"rmse", f.rmse}};
                text += j.dump() + "\n";
            }
            if (fb.out_path.empty()) out << text;
            else write_text_file(fb.out_path, text);
        };
    });

    // baseline-scramble -----------------------------------------------------
    struct {
        std::string corpus, out_corpus, out_embeddings;
        EmbeddingSource emb;
        std::size_t count = 1, sources = 20;
    } bs;
    auto* bs_cmd = app.add_subcommand("baseline-scramble",
                                      "Random-sentence baseline articles: one sentence from each of m source articles");
    bs_cmd->add_option("--corpus", bs.corpus, "Source corpus")->required();
    add_embedding_flags(bs_cmd, bs.emb);
    bs_cmd->add_option("--count", bs.count, "Articles to generate")->capture_default_str()->check(CLI::PositiveNumber);
    bs_cmd->add_option("--sources", bs.sources, "Source articles per generated article (m)")->capture_default_str()
        ->check(CLI::PositiveNumber);
    bs_cmd->add_option("--out-corpus", bs.out_corpus, "Output corpus file")->required();
    bs_cmd->add_option("--out-embeddings", bs.out_embeddings, "Output embedding file (text)")->required();
    bs_cmd->callback([&] {
        action = [&] {
            CorpusFile corpus = load_corpus(bs.corpus);
            EmbeddingStore store = obtain_embeddings(corpus, bs.emb, common.jobs, err);
            err << "seed=" << common.seed << "\n";
            Rng rng(common.seed);
            CorpusFile result;
            EmbeddingStore out_store;
            out_store.model = store.model;
            for (std::size_t g = 0; g < bs.count; ++g) {
                ScrambledArticle s = make_scrambled_article(corpus.articles, bs.sources, rng);
                std::vector<double> data;
                for (auto [src, sentence] : s.sources) {
                    auto row = store.get(corpus.articles[src].id()).row(sentence - 1);
                    data.insert(data.end(), row.begin(), row.end());
                }
                out_store.put(EmbeddingMatrix(s.article.id(), store.dim(), std::move(data)));
                result.articles.push_back(std::move(s.article));
                result.scores.emplace_back();
                result.labels.emplace_back();
            }
            save_corpus(result, bs.out_corpus);
            save_embeddings(out_store, bs.out_embeddings, EmbeddingFormat::text);
            out << bs.out_corpus << "\t" << result.articles.size() << " articles\n";
        };
    });

    // features --------------------------------------------------------------
    struct {
        std::string corpus, out_path;
        EmbeddingSource emb;
        std::size_t samples = 1000;
    } ft;
    auto* ft_cmd = app.add_subcommand("features", "90-d multi-size CSD-1 feature vectors per essay");
    ft_cmd->add_option("--corpus", ft.corpus, "Essay corpus (labels from \"label\" or merged \"scores\")")->required();
    add_embedding_flags(ft_cmd, ft.emb);
    ft_cmd->add_option("--samples", ft.samples, "Blocks per size (N)")->capture_default_str()->check(CLI::PositiveNumber);
    ft_cmd->add_option("--out", ft.out_path, "Feature JSON Lines file")->required();
    ft_cmd->callback([&] {
        action = [&] {
            CorpusFile corpus = load_corpus(ft.corpus);
            EmbeddingStore store = obtain_embeddings(corpus, ft.emb, common.jobs, err);
            err << "seed=" << common.seed << "\n";
            FeatureOptions opts;
            opts.samples = ft.samples;
            std::vector<FeatureRecord> records(corpus.articles.size());
            parallel_for(records.size(), common.jobs, [&](std::size_t i) {
                const Article& a = corpus.articles[i];
                FeatureVector fv = extract_features(a, store.get(a.id()), article_seed(common.seed, a.id()), opts);
                records[i] = {a.id(), std::move(fv.values), record_label(corpus, i)};
            });
            std::string text;
            for (const auto& r : records) text += feature_line(r);
            write_text_file(ft.out_path, text);
            out << ft.out_path << "\t" << records.size() << " essays\n";
        };
    });

    // train -----------------------------------------------------------------
    struct {
        std::string features, model, test_out, train_out, kernel = "rbf";
        double train_frac = 0.8, c = 1.0, gamma = 0.0, tol = 1e-3;
        std::size_t max_iter = 10000;
    } tr;
    auto* tr_cmd = app.add_subcommand("train", "Train the one-vs-one SVC on labelled features (stratified split)");
    tr_cmd->add_option("--features", tr.features, "Feature JSON Lines file")->required();
    tr_cmd->add_option("--model", tr.model, "Output model JSON")->required();
    tr_cmd->add_option("--train-frac", tr.train_frac, "Training fraction; 1 trains on everything")->capture_default_str();
    tr_cmd->add_option("--test-out", tr.test_out, "Write held-out feature records here");
    tr_cmd->add_option("--train-out", tr.train_out, "Write training feature records here");
    tr_cmd->add_option("--C", tr.c, "Soft-margin penalty")->capture_default_str();
    tr_cmd->add_option("--gamma", tr.gamma, "RBF gamma; <= 0 means scale")->capture_default_str();
    tr_cmd->add_option("--kernel", tr.kernel, "rbf or linear")->check(CLI::IsMember({"rbf", "linear"}))->capture_default_str();
    tr_cmd->add_option("--tol", tr.tol, "SMO stopping tolerance")->capture_default_str();
    tr_cmd->add_option("--max-iter", tr.max_iter, "SMO iteration cap per pair")->capture_default_str();
    tr_cmd->callback([&] {
        action = [&] {
            auto records = read_feature_file(tr.features);
            std::vector<double> labels;
            for (const auto& r : records) {
                if (!r.label) throw DataError("feature record '" + r.id + "' has no label");
                labels.push_back(*r.label);
            }
            std::vector<std::size_t> train_idx, test_idx;
            if (tr.train_frac >= 1.0) {
                for (std::size_t i = 0; i < records.size(); ++i) train_idx.push_back(i);
            } else {
                err << "seed=" << common.seed << "\n";
                Split split = split_dataset(labels, tr.train_frac, common.seed);
                train_idx = split.train;
                test_idx = split.test;
            }
            std::vector<std::vector<double>> x;
            std::vector<double> y;
            for (auto i : train_idx) {
                x.push_back(records[i].values);
                y.push_back(labels[i]);
            }
            SvcParams params;
            params.c = tr.c;
            params.gamma = tr.gamma;
            params.kernel = tr.kernel == "rbf" ? KernelType::rbf : KernelType::linear;
            params.tol = tr.tol;
            params.max_iter = tr.max_iter;
            params.jobs = common.jobs;
            SvmModel model = train_svc(x, y, params);
            write_text_file(tr.model, model.to_json().dump() + "\n");
            auto dump = [&](const std::string& path, const std::vector<std::size_t>& idx) {
                if (path.empty()) return;
                std::string text;
                for (auto i : idx) text += feature_line(records[i]);
                write_text_file(path, text);
            };
            dump(tr.test_out, test_idx);
            dump(tr.train_out, train_idx);
            out << tr.model << "\t" << model.classes.size() << " classes\t" << train_idx.size() << " train\t"
                << test_idx.size() << " held out\n";
        };
    });

    // predict ---------------------------------------------------------------
    struct {
        std::string model, features, out_path;
    } pr;
    auto* pr_cmd = app.add_subcommand("predict", "Predict organization labels for feature records");
    pr_cmd->add_option("--model", pr.model, "Model JSON")->required();
    pr_cmd->add_option("--features", pr.features, "Feature JSON Lines file")->required();
    pr_cmd->add_option("--out", pr.out_path, "Predictions JSON Lines file")->required();
    pr_cmd->callback([&] {
        action = [&] {
            SvmModel model = SvmModel::from_json(read_json_file(pr.model));
            auto records = read_feature_file(pr.features);
            std::string text;
            for (const auto& r : records) {
                nlohmann::json j{{"id", r.id}, {"pred", predict_svc(model, r.values)},
                                 {"label", r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr)}};
                text += j.dump() + "\n";
            }
            write_text_file(pr.out_path, text);
            out << pr.out_path << "\t" << records.size() << " predictions\n";
        };
    });

    // eval ------------------------------------------------------------------
    struct {
        std::string predictions, out_path;
        std::string tolerances = "0,0.5,1";
    } ev;
    auto* ev_cmd = app.add_subcommand("eval", "Hit-rate and tolerance-relaxed macro-F1 at each tolerance");
    ev_cmd->add_option("--predictions", ev.predictions, "Predictions JSON Lines file")->required();
    ev_cmd->add_option("--tolerances", ev.tolerances, "Comma list of tolerances")->capture_default_str();
    ev_cmd->add_option("--out", ev.out_path, "Metrics JSON file");
    ev_cmd->callback([&] {
        action = [&] {
            const auto tolerances = parse_number_list(ev.tolerances);
            std::ifstream in(ev.predictions);
            if (!in) throw DataError("cannot open '" + ev.predictions + "' for reading");
            std::vector<double> preds, labels;
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                try {
                    auto j = nlohmann::json::parse(line);
                    if (j.at("label").is_null()) throw DataError("prediction has no true label");
                    preds.push_back(j.at("pred").get<double>());
                    labels.push_back(j.at("label").get<double>());
                } catch (const std::exception& e) {
                    throw DataError(ev.predictions + ":" + std::to_string(line_no) + ": " + e.what());
                }
            }
            auto metrics = evaluate(preds, labels, tolerances);
            out << "tolerance\thit_rate%\tmacro_f1%\n";
            for (const auto& m : metrics) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "%g\t%.2f\t%.2f\n", m.tolerance, 100.0 * m.hit_rate, 100.0 * m.macro_f1);
                out << buf;
            }
            if (!ev.out_path.empty()) write_metrics(metrics, labels.size(), ev.out_path);
        };
    });

    // embed-fetch -----------------------------------------------------------
    struct {
        std::string corpus, cache, provider_url;
        unsigned retries = 2;
    } ef;
    auto* ef_cmd = app.add_subcommand("embed-fetch", "Fetch sentence embeddings from a provider into a cache file");
    ef_cmd->add_option("--corpus", ef.corpus, "Corpus JSON Lines file")->required();
    ef_cmd->add_option("--cache", ef.cache, "Embedding cache (text format), created or extended")->required();
    ef_cmd->add_option("--provider-url", ef.provider_url, "Provider base URL (default: $CSD_PROVIDER_URL)");
    ef_cmd->add_option("--retries", ef.retries, "Retries after transport/5xx failures")->capture_default_str();
    ef_cmd->callback([&] {
        action = [&] {
            if (ef.provider_url.empty()) {
                if (const char* env = std::getenv("CSD_PROVIDER_URL")) ef.provider_url = env;
            }
            if (ef.provider_url.empty()) throw CLI::ValidationError("--provider-url or CSD_PROVIDER_URL is required");
            CorpusFile corpus = load_corpus(ef.corpus);
            EmbeddingStore store;
            if (fs::exists(ef.cache)) store = load_embeddings(ef.cache);
            ProviderOptions provider{ef.provider_url, ef.retries};
            std::size_t fetched = fetch_missing(provider, corpus.articles, store, common.jobs);
            if (fetched > 0 || !fs::exists(ef.cache)) save_embeddings(store, ef.cache, EmbeddingFormat::text);
            out << ef.cache << "\t" << fetched << " fetched\t" << (corpus.articles.size() - fetched) << " cached\n";
        };
    });

    // plot-data -------------------------------------------------------------
    struct {
        std::string corpus, out_path, lc;
        EmbeddingSource emb;
        std::vector<std::string> size_fracs{"0.3"};
    } pd;
    auto* pd_cmd = app.add_subcommand("plot-data", "Plot-ready CSV: corpus mean/median CSD-1 and CSD-2, or an LC curve");
    pd_cmd->add_option("--corpus", pd.corpus, "Corpus JSON Lines file");
    pd_cmd->add_option("--embeddings", pd.emb.embeddings, "Embedding file");
    pd_cmd->add_option("--provider-url", pd.emb.provider_url, "Provider for embeddings missing from the cache");
    pd_cmd->add_option("--size-frac", pd.size_fracs, "Block size fractions for CSD-1 columns")->capture_default_str();
    pd_cmd->add_option("--lc", pd.lc, "Emit LC_x at x = j/100 for parameters a,b,alpha,beta instead");
    pd_cmd->add_option("--out", pd.out_path, "Output CSV")->required();
    pd_cmd->callback([&] {
        action = [&] {
            std::vector<std::string> headers{"x"};
            std::vector<std::vector<double>> columns;
            std::vector<double> grid(100);
            for (std::size_t j = 0; j < 100; ++j) grid[j] = static_cast<double>(j + 1) / 100.0;
            if (!pd.lc.empty()) {
                auto p = parse_number_list(pd.lc);
                if (p.size() != 4) throw CLI::ValidationError("--lc expects a,b,alpha,beta");
                LcParams params{p[0], p[1], p[2], p[3]};
                params.validate();
                headers.push_back("lc");
                columns.emplace_back();
                for (double x : grid) columns.back().push_back(lc_transform(x, params));
            } else {
                if (pd.corpus.empty() || pd.emb.embeddings.empty()) {
                    throw CLI::ValidationError("plot-data needs --corpus and --embeddings (or --lc)");
                }
                CorpusFile corpus = load_corpus(pd.corpus);
                EmbeddingStore store = obtain_embeddings(corpus, pd.emb, common.jobs, err);
                err << "seed=" << common.seed << "\n";
                Csd1Options opts;
                opts.jobs = common.jobs;
                for (double c : expand_lists(pd.size_fracs)) {
                    if (!(c > 0.0 && c <= 1.0)) throw DomainError("size fractions must lie in (0, 1]");
                    std::vector<CsdCurve> curves;
                    for (const auto& a : corpus.articles) {
                        curves.push_back(csd1_approx(a, store.get(a.id()), block_size_for_fraction(c, a.size()),
                                                     article_seed(common.seed, a.id()), opts));
                    }
                    for (Statistic st : {Statistic::mean, Statistic::median}) {
                        auto agg = aggregate_curves(curves, st);
                        headers.push_back(std::string("csd1_") + (st == Statistic::mean ? "mean" : "median") + "_c" +
                                          format_double(c));
                        columns.push_back(agg.ys);
                    }
                }
                std::vector<Csd2Curve> c2(corpus.articles.size());
                parallel_for(c2.size(), common.jobs, [&](std::size_t i) {
                    c2[i] = csd2_curve(corpus.articles[i], store.get(corpus.articles[i].id()));
                });
                for (Statistic st : {Statistic::mean, Statistic::median}) {
                    headers.push_back(std::string("csd2_") + (st == Statistic::mean ? "mean" : "median"));
                    columns.push_back(aggregate_csd2(c2, st).ys);
                }
            }
            std::string text;
            for (std::size_t h = 0; h < headers.size(); ++h) text += (h ? "," : "") + headers[h];
            text += "\n";
            for (std::size_t j = 0; j < grid.size(); ++j) {
                text += format_double(grid[j]);
                for (const auto& col : columns) text += "," + format_double(col[j]);
                text += "\n";
            }
            write_text_file(pd.out_path, text);
            out << pd.out_path << "\t" << columns.size() << " series\n";
        };
    });

    try {
        app.parse(argc, argv);
        if (action) action();
        return 0;
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace csd::cli
