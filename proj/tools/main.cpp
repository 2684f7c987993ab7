#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "geofusion/config.hpp"
#include "geofusion/probes.hpp"

using namespace geofusion;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key = value config file");
    cmd->add_option("--set", opts.overrides, "override a config entry, e.g. --set train.lr=1e-4");
}

KvFile load_config(const CommonOpts& opts) {
    KvFile kv;
    for (const auto& s : opts.overrides) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw IoError("--set expects key=value, got: " + s);
        kv.entries.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!opts.config_path.empty()) {
        KvFile file = KvFile::load(opts.config_path);
        kv.entries.insert(kv.entries.end(), file.entries.begin(), file.entries.end());
    }
    return kv;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

SyntheticWorld load_world(const std::string& path) { return SyntheticWorld::load(path); }

DatasetManifest load_manifest(const std::string& path) {
    return DatasetManifest::from_text(read_text_file(path));
}

JointModel make_model(const KvFile& kv, const SyntheticWorld& world, uint64_t seed) {
    KvFile merged = kv;
    // the model must agree with the world's data dimensions
    merged.entries.emplace_back("world.channels", std::to_string(world.config().channels));
    merged.entries.emplace_back("world.n_features", std::to_string(world.config().n_features));
    return JointModel(model_config_from(merged), seed);
}

TractSplits make_split(const KvFile& kv, const SyntheticWorld& world, const std::string& kind,
                       const std::string& manifest_path) {
    if (kind == "random") {
        double frac = kv.has("probe.test_frac") ? std::stod(kv.get("probe.test_frac")) : 0.25;
        uint64_t seed = kv.has("probe.seed") ? std::stoull(kv.get("probe.seed")) : 17;
        return random_tract_split(world.n_tracts(), frac, seed);
    }
    if (kind == "holdout") {
        if (manifest_path.empty()) throw IoError("holdout split requires --manifest");
        return region_holdout_split(world, load_manifest(manifest_path));
    }
    throw IoError("unknown split kind: " + kind + " (use random or holdout)");
}

std::string probe_report_text(const ProbeResult& p, const EmbeddingTable& table,
                              const TractSplits& split) {
    std::ostringstream out;
    out.precision(6);
    out << "embeddings = " << table.provenance << "\n";
    out << "dim = " << table.dim() << "\n";
    out << "split = " << split.name << "\n";
    out << "n_train = " << split.train.size() << "\n";
    out << "n_test = " << split.test.size() << "\n";
    out << "ridge_lambda = " << p.ridge_lambda << "\n";
    out << "r2_train = " << p.r2_train << "\n";
    out << "r2_test = " << p.r2_test << "\n";
    return out.str();
}

int cmd_generate(const CommonOpts& opts, uint64_t seed_flag, bool has_seed,
                 const std::string& out_dir) {
    KvFile kv = load_config(opts);
    WorldConfig wcfg = world_config_from(kv);
    SplitParams sp = split_params_from(kv);
    uint64_t seed = has_seed ? seed_flag
                             : (kv.has("world.seed") ? std::stoull(kv.get("world.seed")) : 42);
    ensure_dir(out_dir);
    SyntheticWorld world = SyntheticWorld::generate(wcfg, seed);
    world.save(out_dir + "/world.bin");
    DatasetManifest manifest =
        make_splits(world, sp.n_regions, sp.region_km, sp.holdout_frac, sp.seed);
    write_text_file(out_dir + "/manifest.txt", manifest.to_text());
    std::cout << "world: " << world.n_tracts() << " tracts, raster " << wcfg.raster_cells << "x"
              << wcfg.raster_cells << "x" << wcfg.channels << ", seed " << seed << "\n";
    std::cout << "splits: " << manifest.train_centers.size() << " train / "
              << manifest.val_centers.size() << " val regions of " << manifest.region_km << " km\n";
    std::cout << "wrote " << out_dir << "/world.bin and manifest.txt\n";
    return 0;
}

int cmd_pretrain(const CommonOpts& opts, const std::string& world_path,
                 const std::string& manifest_path, const std::string& out_dir) {
    KvFile kv = load_config(opts);
    SyntheticWorld world = load_world(world_path);
    DatasetManifest manifest = load_manifest(manifest_path);
    TrainConfig cfg = train_config_from(kv, "pretrain");
    ensure_dir(out_dir);
    JointModel model = make_model(kv, world, cfg.seed);
    TrainResult result = pretrain_vit(model, world, manifest, cfg, out_dir + "/pretrain_log.tsv");
    save_checkpoint(out_dir + "/vit.ckpt", model, nullptr, result.steps, cfg.seed);
    std::ostringstream s;
    s.precision(6);
    s << "val_loss_init = " << result.init_val_vis << "\n";
    s << "val_loss_final = " << result.final_val_vis << "\n";
    s << "reduction = " << 1.0 - result.final_val_vis / result.init_val_vis << "\n";
    s << "steps = " << result.steps << "\n";
    write_text_file(out_dir + "/summary.txt", s.str());
    std::cout << s.str();
    std::cout << "wrote " << out_dir << "/vit.ckpt\n";
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& world_path,
              const std::string& manifest_path, const std::string& init_ckpt,
              const std::string& out_dir) {
    KvFile kv = load_config(opts);
    SyntheticWorld world = load_world(world_path);
    DatasetManifest manifest = load_manifest(manifest_path);
    TrainConfig cfg = train_config_from(kv, "train");
    ensure_dir(out_dir);
    JointModel model = make_model(kv, world, cfg.seed);
    if (!init_ckpt.empty()) load_checkpoint(init_ckpt, model);
    TrainResult result = joint_train(model, world, manifest, cfg, out_dir + "/train_log.tsv");
    save_checkpoint(out_dir + "/joint.ckpt", model, nullptr, result.steps, cfg.seed);
    std::ostringstream s;
    s.precision(6);
    s << "val_vis_init = " << result.init_val_vis << "\n";
    s << "val_vis_final = " << result.final_val_vis << "\n";
    s << "val_tab_init = " << result.init_val_tab << "\n";
    s << "val_tab_final = " << result.final_val_tab << "\n";
    s << "skipped_regions = " << result.skipped_regions << "\n";
    s << "steps = " << result.steps << "\n";
    write_text_file(out_dir + "/summary.txt", s.str());
    std::cout << s.str();
    std::cout << "wrote " << out_dir << "/joint.ckpt\n";
    return 0;
}

int cmd_embed(const CommonOpts& opts, const std::string& world_path, const std::string& ckpt,
              const std::string& out_file) {
    KvFile kv = load_config(opts);
    SyntheticWorld world = load_world(world_path);
    JointModel model = make_model(kv, world, 0);
    load_checkpoint(ckpt, model);
    EmbeddingTable table = extract_embeddings(model, world);
    if (model.cfg.fusion.layers == 0) table.provenance = "tab-mae";
    table.save_tsv(out_file);
    std::cout << "wrote " << table.size() << " x " << table.dim() << " embeddings to " << out_file
              << "\n";
    return 0;
}

int cmd_probe(const CommonOpts& opts, const std::string& world_path,
              const std::string& embeddings_path, const std::string& baseline,
              const std::string& tab_mae_path, const std::string& split_kind,
              const std::string& manifest_path, double ridge, const std::string& out_file) {
    KvFile kv = load_config(opts);
    SyntheticWorld world = load_world(world_path);

    EmbeddingTable table;
    if (!embeddings_path.empty()) {
        table = EmbeddingTable::load_tsv(embeddings_path);
    } else if (!baseline.empty()) {
        EmbeddingTable latents;
        const EmbeddingTable* latents_ptr = nullptr;
        if (baseline == "late_fusion") {
            if (tab_mae_path.empty())
                throw IoError(
                    "late_fusion baseline requires --tab-mae-embeddings (missing checkpoint "
                    "products)");
            latents = EmbeddingTable::load_tsv(tab_mae_path);
            latents_ptr = &latents;
        }
        BaselineKind kind;
        if (baseline == "tab")
            kind = BaselineKind::Tab;
        else if (baseline == "vis_mean")
            kind = BaselineKind::VisMean;
        else if (baseline == "concat")
            kind = BaselineKind::Concat;
        else if (baseline == "late_fusion")
            kind = BaselineKind::LateFusion;
        else
            throw IoError("unknown baseline: " + baseline);
        table = baseline_embeddings(world, kind, latents_ptr);
    } else {
        throw IoError("probe needs --embeddings or --baseline");
    }

    TractSplits split = make_split(kv, world, split_kind, manifest_path);
    ProbeResult result = probe_table(table, world, split, ridge);
    std::string report = probe_report_text(result, table, split);
    if (!out_file.empty()) write_text_file(out_file, report);
    std::cout << report;
    return 0;
}

int cmd_pca(const std::string& embeddings_path, int k, const std::string& out_prefix) {
    EmbeddingTable table = EmbeddingTable::load_tsv(embeddings_path);
    PcaResult res = pca(table.vectors, k);
    if (!res.warning.empty()) std::cerr << "warning: " << res.warning << "\n";

    std::ostringstream ratios;
    ratios.precision(10);
    ratios << "component\texplained_ratio\n";
    for (int c = 0; c < res.k; ++c) ratios << c << "\t" << res.explained_ratio[c] << "\n";
    write_text_file(out_prefix + "_ratios.tsv", ratios.str());

    std::ostringstream comp;
    comp.precision(17);
    for (int c = 0; c < res.k; ++c) {
        for (int j = 0; j < res.components.shape[1]; ++j) {
            if (j) comp << "\t";
            comp << res.components.at(c, j);
        }
        comp << "\n";
    }
    write_text_file(out_prefix + "_components.tsv", comp.str());

    std::ostringstream scores;
    scores.precision(17);
    scores << "id";
    for (int c = 0; c < res.k; ++c) scores << "\tpc" << c;
    scores << "\n";
    for (int i = 0; i < table.size(); ++i) {
        scores << table.ids[i];
        for (int c = 0; c < res.k; ++c) scores << "\t" << res.scores.at(i, c);
        scores << "\n";
    }
    write_text_file(out_prefix + "_scores.tsv", scores.str());

    std::cout << ratios.str();
    return 0;
}

int cmd_reconstruct(const CommonOpts& opts, const std::string& world_path, const std::string& ckpt,
                    double cx, double cy, double mask_ratio, uint64_t mask_seed,
                    const std::string& out_file) {
    KvFile kv = load_config(opts);
    SyntheticWorld world = load_world(world_path);
    JointModel model = make_model(kv, world, 0);
    load_checkpoint(ckpt, model);
    if (cx < 0) cx = world.config().side_km / 2.0;
    if (cy < 0) cy = world.config().side_km / 2.0;
    std::string report = reconstruction_report(model, world, {cx, cy}, mask_ratio, mask_seed);
    write_text_file(out_file, report);
    std::cout << "wrote reconstruction grids to " << out_file << "\n";
    return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& world_path,
               const std::string& manifest_path, const std::string& axis,
               const std::string& grid_csv, const std::string& out_file) {
    KvFile kv = load_config(opts);
    SyntheticWorld world = load_world(world_path);
    DatasetManifest manifest = load_manifest(manifest_path);
    std::vector<std::string> grid;
    {
        std::istringstream ss(grid_csv);
        std::string part;
        while (std::getline(ss, part, ',')) grid.push_back(part);
    }
    if (grid.empty()) throw IoError("ablate: empty grid");

    KvFile merged = kv;
    merged.entries.emplace_back("world.channels", std::to_string(world.config().channels));
    merged.entries.emplace_back("world.n_features", std::to_string(world.config().n_features));
    ModelConfig base = model_config_from(merged);
    TrainConfig joint_cfg = train_config_from(kv, "train");
    TrainConfig pre_cfg = train_config_from(kv, "pretrain");

    VitPretrainCache cache(world, manifest, pre_cfg);
    double frac = kv.has("probe.test_frac") ? std::stod(kv.get("probe.test_frac")) : 0.25;
    uint64_t pseed = kv.has("probe.seed") ? std::stoull(kv.get("probe.seed")) : 17;
    TractSplits splits = random_tract_split(world.n_tracts(), frac, pseed);

    AblationReport report =
        run_ablation(axis, grid, world, manifest, base, joint_cfg, cache, splits);
    if (!out_file.empty()) write_text_file(out_file, report.to_text());
    std::cout << report.to_text();
    return 0;
}

int cmd_attn_stats(const CommonOpts& opts, const std::string& world_path,
                   const std::string& manifest_path, const std::string& ckpt, double radius,
                   const std::string& out_file) {
    KvFile kv = load_config(opts);
    SyntheticWorld world = load_world(world_path);
    DatasetManifest manifest = load_manifest(manifest_path);
    JointModel model = make_model(kv, world, 0);
    load_checkpoint(ckpt, model);
    LocalityReport report = attention_locality(model, world, manifest.val_centers, radius);
    if (!out_file.empty()) write_text_file(out_file, report.to_text());
    std::cout << report.to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geofusion: joint vision-tabular geospatial representation learning"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_dir, world_path, manifest_path, ckpt, embeddings_path, out_file;
    std::string baseline, tab_mae_path, split_kind = "random", axis, grid_csv;
    uint64_t seed = 0, mask_seed = 7;
    double ridge = -1.0, radius = 10.0, cx = -1.0, cy = -1.0, mask_ratio = 0.5;
    int k = 8;

    auto* generate = app.add_subcommand("generate", "generate a synthetic world + splits");
    add_common(generate, opts);
    auto* seed_opt = generate->add_option("--seed", seed, "world seed");
    generate->add_option("--out", out_dir, "output directory")->required();

    auto* pretrain = app.add_subcommand("pretrain", "MAE-pretrain the vision pathway");
    add_common(pretrain, opts);
    pretrain->add_option("--world", world_path)->required();
    pretrain->add_option("--manifest", manifest_path)->required();
    pretrain->add_option("--out", out_dir)->required();

    auto* train = app.add_subcommand("train", "joint masked-autoencoding training");
    add_common(train, opts);
    train->add_option("--world", world_path)->required();
    train->add_option("--manifest", manifest_path)->required();
    train->add_option("--init", ckpt, "checkpoint to start from (pretrained ViT)");
    train->add_option("--out", out_dir)->required();

    auto* embed = app.add_subcommand("embed", "extract per-tract fused embeddings");
    add_common(embed, opts);
    embed->add_option("--world", world_path)->required();
    embed->add_option("--checkpoint", ckpt)->required();
    embed->add_option("--out", out_file)->required();

    auto* probe = app.add_subcommand("probe", "ridge linear probe with held-out R2");
    add_common(probe, opts);
    probe->add_option("--world", world_path)->required();
    probe->add_option("--embeddings", embeddings_path, "embedding table tsv");
    probe->add_option("--baseline", baseline, "tab | vis_mean | concat | late_fusion");
    probe->add_option("--tab-mae-embeddings", tab_mae_path, "latents for late_fusion");
    probe->add_option("--split", split_kind, "random | holdout");
    probe->add_option("--manifest", manifest_path, "needed for the holdout split");
    probe->add_option("--ridge", ridge, "ridge strength (default: scale-aware)");
    probe->add_option("--out", out_file);

    auto* pca_cmd = app.add_subcommand("pca", "principal components of an embedding table");
    pca_cmd->add_option("--embeddings", embeddings_path)->required();
    pca_cmd->add_option("-k,--components", k);
    pca_cmd->add_option("--out-prefix", out_file)->required();

    auto* recon = app.add_subcommand("reconstruct", "export input/masked/recon grids");
    add_common(recon, opts);
    recon->add_option("--world", world_path)->required();
    recon->add_option("--checkpoint", ckpt)->required();
    recon->add_option("--center-x", cx, "region center x in km (default: world center)");
    recon->add_option("--center-y", cy);
    recon->add_option("--mask-ratio", mask_ratio);
    recon->add_option("--mask-seed", mask_seed);
    recon->add_option("--out", out_file)->required();

    auto* ablate = app.add_subcommand("ablate", "train and probe an ablation grid");
    add_common(ablate, opts);
    ablate->add_option("--world", world_path)->required();
    ablate->add_option("--manifest", manifest_path)->required();
    ablate
        ->add_option("--axis", axis, "tab_dim | encodings | fusion_capacity | tab_mask | row_attn")
        ->required();
    ablate->add_option("--grid", grid_csv, "comma-separated grid labels")->required();
    ablate->add_option("--out", out_file);

    auto* attn = app.add_subcommand("attn-stats", "tab<-vis attention locality statistics");
    add_common(attn, opts);
    attn->add_option("--world", world_path)->required();
    attn->add_option("--manifest", manifest_path)->required();
    attn->add_option("--checkpoint", ckpt)->required();
    attn->add_option("--radius", radius, "locality radius in km");
    attn->add_option("--out", out_file);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(opts, seed, seed_opt->count() > 0, out_dir);
        if (pretrain->parsed()) return cmd_pretrain(opts, world_path, manifest_path, out_dir);
        if (train->parsed()) return cmd_train(opts, world_path, manifest_path, ckpt, out_dir);
        if (embed->parsed()) return cmd_embed(opts, world_path, ckpt, out_file);
        if (probe->parsed())
            return cmd_probe(opts, world_path, embeddings_path, baseline, tab_mae_path, split_kind,
                             manifest_path, ridge, out_file);
        if (pca_cmd->parsed()) return cmd_pca(embeddings_path, k, out_file);
        if (recon->parsed())
            return cmd_reconstruct(opts, world_path, ckpt, cx, cy, mask_ratio, mask_seed, out_file);
        if (ablate->parsed())
            return cmd_ablate(opts, world_path, manifest_path, axis, grid_csv, out_file);
        if (attn->parsed())
            return cmd_attn_stats(opts, world_path, manifest_path, ckpt, radius, out_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
