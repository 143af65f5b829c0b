#include "semcomp/cli.hpp"

#include <algorithm>
#include <filesystem>

#include <CLI11.hpp>

#include "semcomp/codec.hpp"
#include "semcomp/codegen_roundtrip.hpp"
#include "semcomp/error.hpp"
#include "semcomp/eval_pipeline.hpp"
#include "semcomp/file_io.hpp"
#include "semcomp/llm_gateway.hpp"
#include "semcomp/reporting.hpp"

namespace semcomp::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct NetworkOpts {
  std::string transport;
  bool allow_network = false;
};

struct EvaluateOpts {
  std::string config;
  std::string out;
  std::vector<std::string> methods;
  double epsilon = 0.0;
  std::string norm;
  int workers = 0;
  bool quiet = false;
  NetworkOpts net;
};

struct CodecOpts {
  std::string method;
  std::string in;
  std::string out;
  std::string config;
  NetworkOpts net;
};

struct CodegenOpts {
  std::string config;
  std::string out;
  int workers = 0;
  NetworkOpts net;
};

struct ReportOpts {
  std::string in;
  std::string out;
};

struct TranscriptOpts {
  std::string in;
  std::vector<std::string> scan_env;
};

bool is_usage_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::MissingFile:
    case ErrorCode::ManifestInvalid:
    case ErrorCode::NotUtf8:
    case ErrorCode::InvalidLevel:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::AuthMissing:
      return true;
    default:
      return false;
  }
}

void add_network_options(CLI::App* cmd, NetworkOpts& net) {
  cmd->add_option("--transport", net.transport, "live, replay:PATH or record:PATH (overrides the config)");
  cmd->add_flag("--allow-network", net.allow_network, "Permit live or record transports to reach the network");
}

void apply_transport(const NetworkOpts& net, llm::TransportSpec& spec) {
  if (!net.transport.empty()) spec = llm::parse_transport_spec(net.transport, fs::current_path());
  if (spec.mode != llm::TransportMode::Replay && !net.allow_network) {
    throw Error(ErrorCode::ConfigInvalid, "transport '" + spec.describe() + "' reaches the network; pass --allow-network");
  }
}

void list_written(std::ostream& out, const std::vector<fs::path>& files) {
  for (const auto& f : files) out << f.generic_string() << "\n";
}

int cmd_evaluate(const EvaluateOpts& o, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
  pipeline::RunConfig cfg = pipeline::load_run_config(o.config);
  apply_transport(o.net, cfg.transport);
  if (!o.methods.empty()) {
    std::vector<pipeline::MethodSpec> chosen;
    for (const auto& id : o.methods) {
      const auto it = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                                   [&](const pipeline::MethodSpec& m) { return m.method_id == id; });
      chosen.push_back(it != cfg.methods.end() ? *it : pipeline::parse_method_shorthand(id));
    }
    cfg.methods = std::move(chosen);
  }
  if (cmd.count("--epsilon") > 0) cfg.epsilon = o.epsilon;
  if (!o.norm.empty()) cfg.norm = pipeline::parse_norm_mode(o.norm);
  if (o.workers > 0) cfg.workers = static_cast<unsigned>(o.workers);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (cfg.out_dir.empty()) throw Error(ErrorCode::ConfigInvalid, "no output directory (use --out or \"out\" in the config)");

  pipeline::RunHooks hooks;
  if (!o.quiet) hooks.log = [&err](const std::string& line) { err << line << "\n"; };
  const auto run = pipeline::run_cohort(cfg, hooks);

  std::vector<fs::path> written = report::emit_csv(run.report, cfg.out_dir);
  written.push_back(cfg.out_dir / "report.json");
  report::emit_json(run.report, written.back());
  written.push_back(cfg.out_dir / "trials.jsonl");
  pipeline::emit_trials(run.trials, written.back());
  for (auto& p : report::emit_plot_series(run.report, cfg.out_dir / "series")) written.push_back(std::move(p));
  list_written(out, written);

  err << "trials: " << run.report.per_text.size() << " ok, " << run.report.failures.size() << " failed\n";
  return run.report.failures.empty() ? kOk : kTrialFailure;
}

// Endpoints and transport from any config document that carries them.
struct EndpointContext {
  std::map<std::string, llm::EndpointProfile> endpoints;
  llm::TransportSpec transport;
};

EndpointContext load_endpoint_context(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::ConfigInvalid, "llm methods need --config with an 'endpoints' block");
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::MissingFile, "config file not found: " + path);
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path + ": " + e.what());
  }
  EndpointContext ctx;
  const auto eps = j.find("endpoints");
  if (eps == j.end() || !eps->is_object()) throw Error(ErrorCode::ConfigInvalid, path + ": no 'endpoints' object");
  for (const auto& [name, body] : eps->items()) ctx.endpoints.emplace(name, llm::profile_from_json(name, body));
  const fs::path base = fs::path(path).parent_path();
  ctx.transport = llm::parse_transport_spec(j.value("transport", "replay:transcript.ndjson"), base);
  return ctx;
}

int cmd_codec(const CodecOpts& o, prompts::Direction direction, std::ostream& out) {
  const pipeline::MethodSpec method = pipeline::parse_method_shorthand(o.method);
  const std::string input = io::read_file(o.in);
  std::string output;
  if (method.kind == pipeline::MethodKind::Codec) {
    if (direction == prompts::Direction::Compress) {
      const auto res = codec::deflate(input, method.level);
      output.assign(res.compressed.begin(), res.compressed.end());
    } else {
      const auto bytes = codec::inflate(std::span(reinterpret_cast<const std::uint8_t*>(input.data()), input.size()));
      output.assign(bytes.begin(), bytes.end());
    }
  } else {
    EndpointContext ctx = load_endpoint_context(o.config);
    apply_transport(o.net, ctx.transport);
    const auto ep = ctx.endpoints.find(method.endpoint);
    if (ep == ctx.endpoints.end()) throw Error(ErrorCode::ConfigInvalid, "unknown endpoint '" + method.endpoint + "'");
    std::vector<llm::EndpointProfile> profiles;
    for (const auto& [_, p] : ctx.endpoints) profiles.push_back(p);
    llm::Gateway gateway(llm::open_transport(ctx.transport, profiles));
    const auto& tmpl = prompts::PromptCatalog::builtin().resolve(method.strategy, direction, ep->second.prompt_style);
    const auto ex = gateway.chat_once(ep->second, prompts::render(tmpl, input));
    output = pipeline::trim_single_newlines(ex.response_text);
  }
  io::write_file(o.out, output);
  out << o.out << "\t" << input.size() << " -> " << output.size() << " bytes\n";
  return kOk;
}

int cmd_codegen(const CodegenOpts& o, std::ostream& out, std::ostream& err) {
  codegen::CodegenConfig cfg = codegen::load_codegen_config(o.config);
  apply_transport(o.net, cfg.transport);
  if (o.workers > 0) cfg.workers = static_cast<unsigned>(o.workers);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (cfg.out_dir.empty()) throw Error(ErrorCode::ConfigInvalid, "no output directory (use --out or \"out\" in the config)");

  const auto run = codegen::run_codegen(cfg);
  list_written(out, codegen::emit_codegen(run, cfg.out_dir));
  std::size_t failed = 0;
  for (const auto& r : run.records) {
    if (!r.failed()) continue;
    ++failed;
    err << "FAIL " << r.case_id << " at " << r.failed_stage << ": " << r.failure_reason << "\n";
  }
  const auto& s = run.summary;
  err << "compressed path: " << s.compressed.equivalent << " EQUIVALENT, " << s.compressed.partial << " PARTIAL, "
      << s.compressed.not_equivalent << " NOT_EQUIVALENT\n";
  return failed == 0 ? kOk : kTrialFailure;
}

int cmd_report(const ReportOpts& o, std::ostream& out) {
  const auto rep = report::load_json(o.in);
  std::vector<fs::path> written = report::emit_csv(rep, o.out);
  for (auto& p : report::emit_plot_series(rep, fs::path(o.out) / "series")) written.push_back(std::move(p));
  list_written(out, written);
  return kOk;
}

int cmd_transcript_verify(const TranscriptOpts& o, std::ostream& out, std::ostream& err) {
  const auto t = llm::Transcript::load(o.in);
  std::size_t chat = 0, embed = 0, bad = 0;
  for (const auto& rec : t.records()) {
    (rec.kind == llm::RequestKind::Chat ? chat : embed)++;
    if (llm::request_digest(rec.request) != rec.digest) {
      ++bad;
      err << "digest mismatch: " << rec.digest << "\n";
    }
  }
  const std::string text = t.serialize();
  for (const auto& name : o.scan_env) {
    const char* v = std::getenv(name.c_str());
    if (v != nullptr && *v != '\0' && text.find(v) != std::string::npos) {
      ++bad;
      err << "transcript contains the value of " << name << "\n";
    }
  }
  out << "records " << t.records().size() << " chat " << chat << " embed " << embed << "\n";
  return bad == 0 ? kOk : kTrialFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evaluate LLM-based text compression against zlib baselines.", "semcomp"};
  app.require_subcommand(1, 1);

  EvaluateOpts ev;
  auto* evaluate = app.add_subcommand("evaluate", "Run every text x method trial and write the cohort report");
  evaluate->add_option("--config", ev.config, "Run config (JSON)")->required();
  evaluate->add_option("--out", ev.out, "Output directory");
  evaluate->add_option("--methods", ev.methods, "Method ids from the config, or codec:<level> / llm:<endpoint>:<strategy>");
  evaluate->add_option("--epsilon", ev.epsilon, "Floor on normalized edit distance in ERE");
  evaluate->add_option("--norm", ev.norm, "Cohort normalization")->check(CLI::IsMember({"max-divide", "min-max"}));
  evaluate->add_option("--workers", ev.workers, "Concurrent trials");
  evaluate->add_flag("--quiet", ev.quiet, "No per-trial log lines");
  add_network_options(evaluate, ev.net);

  CodecOpts co, de;
  auto* compress = app.add_subcommand("compress", "Compress one file");
  auto* decompress = app.add_subcommand("decompress", "Decompress one file");
  for (auto [cmd, opts] : {std::pair{compress, &co}, std::pair{decompress, &de}}) {
    cmd->add_option("--method", opts->method, "codec:<level> or llm:<endpoint>:<strategy>")->required();
    cmd->add_option("--in", opts->in, "Input file")->required();
    cmd->add_option("--out", opts->out, "Output file")->required();
    cmd->add_option("--config", opts->config, "Config with an endpoints block (llm methods)");
    add_network_options(cmd, opts->net);
  }

  CodegenOpts cg;
  auto* codegen_cmd = app.add_subcommand("codegen-eval", "Run the code-generation round trip");
  codegen_cmd->add_option("--config", cg.config, "Codegen config (JSON)")->required();
  codegen_cmd->add_option("--out", cg.out, "Output directory");
  codegen_cmd->add_option("--workers", cg.workers, "Concurrent cases");
  add_network_options(codegen_cmd, cg.net);

  ReportOpts rp;
  auto* report_cmd = app.add_subcommand("report", "Re-emit CSV tables and plot series from report.json");
  report_cmd->add_option("--in", rp.in, "report.json")->required();
  report_cmd->add_option("--out", rp.out, "Output directory")->required();

  TranscriptOpts tr;
  auto* transcript = app.add_subcommand("transcript", "Inspect recorded transcripts");
  transcript->require_subcommand(1, 1);
  auto* verify = transcript->add_subcommand("verify", "Check record digests and scan for credentials");
  verify->add_option("--in", tr.in, "Transcript file")->required();
  verify->add_option("--scan-env", tr.scan_env, "Environment variables whose values must not appear");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*evaluate) return cmd_evaluate(ev, *evaluate, out, err);
    if (*compress) return cmd_codec(co, prompts::Direction::Compress, out);
    if (*decompress) return cmd_codec(de, prompts::Direction::Decompress, out);
    if (*codegen_cmd) return cmd_codegen(cg, out, err);
    if (*report_cmd) return cmd_report(rp, out);
    if (*verify) return cmd_transcript_verify(tr, out, err);
  } catch (const Error& e) {
    err << "semcomp: " << e.what() << "\n";
    return is_usage_error(e.code()) ? kUsage : kTrialFailure;
  } catch (const std::exception& e) {
    err << "semcomp: " << e.what() << "\n";
    return kTrialFailure;
  }
  return kUsage;
}

}  // namespace semcomp::cli
