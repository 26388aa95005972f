#include "svq/persistence.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "svq/errors.hpp"
#include "svq/text.hpp"

namespace svq {

namespace {

constexpr std::string_view kMagic = "#svqchain";

bool has_space(std::string_view s) {
  return s.find_first_of(" \t\r\n") != std::string_view::npos;
}

void check_token(std::string_view s, std::string_view what) {
  if (s.empty() || has_space(s) || s.find('=') != std::string_view::npos)
    throw InvalidArgument(std::string(what) + ": '" + std::string(s) +
                          "' must be non-empty and free of whitespace and '='");
}

void check_cell(std::string_view s) {
  if (s.find_first_of(",\r\n") != std::string_view::npos)
    throw InvalidArgument("analysis cell contains ',' or a line break: '" + std::string(s) + "'");
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(sep, start);
    if (end == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

template <class Range>
void append_csv(std::string& out, const Range& values) {
  bool first = true;
  for (const auto& v : values) {
    if (!first) out += ',';
    first = false;
    if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v)>>) {
      out += number_cell(v);
    } else {
      out += v;
    }
  }
  out += '\n';
}

std::string header_line(std::string_view kind,
                        const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string out(kMagic);
  out += ' ';
  out += kind;
  out += " v" + std::to_string(kFormatVersion);
  for (const auto& [k, v] : fields) {
    check_token(k, "header key");
    check_token(v, "header value of " + k);
    out += ' ' + k + '=' + v;
  }
  out += '\n';
  return out;
}

class Reader {
public:
  explicit Reader(std::string_view text) : text_(text) {}

  bool done() const noexcept { return pos_ >= text_.size(); }
  std::size_t line() const noexcept { return line_; }

  std::string_view next(std::string_view what) {
    if (done())
      fail_at_end("unexpected end of file at byte " + std::to_string(pos_) + " while reading " +
                  std::string(what));
    const auto nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos)
      fail_at_end("truncated file: line " + std::to_string(line_ + 1) + " ends at byte " +
                  std::to_string(text_.size()) + " without a newline");
    auto out = text_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    ++line_;
    return out;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("line " + std::to_string(line_) + ": " + msg);
  }

  void expect_end() const {
    if (!done())
      throw FormatError("unexpected content after the last record at byte " + std::to_string(pos_) +
                        " (line " + std::to_string(line_ + 1) + ")");
  }

private:
  [[noreturn]] static void fail_at_end(const std::string& msg) { throw FormatError(msg); }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

ArtifactHeader parse_header_line(std::string_view line) {
  ArtifactHeader h;
  std::istringstream in{std::string(line)};
  std::string magic;
  std::string version;
  in >> magic >> h.kind >> version;
  if (magic != kMagic) throw FormatError("line 1: missing '#svqchain' header");
  if (h.kind.empty()) throw FormatError("line 1: header has no artifact kind");
  if (version.size() < 2 || version[0] != 'v')
    throw FormatError("line 1: malformed version field '" + version + "'");
  try {
    std::size_t used = 0;
    h.version = std::stoi(version.substr(1), &used);
    if (used != version.size() - 1) throw std::invalid_argument(version);
  } catch (const std::exception&) {
    throw FormatError("line 1: malformed version field '" + version + "'");
  }
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      throw FormatError("line 1: malformed header field '" + tok + "'");
    h.fields.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return h;
}

ArtifactHeader expect_header(Reader& r, std::string_view kind) {
  auto h = parse_header_line(r.next("header"));
  if (h.kind != kind)
    throw FormatError("line 1: expected a " + std::string(kind) + " artifact, found '" + h.kind + "'");
  if (h.version != kFormatVersion)
    throw FormatError("line 1: unsupported " + h.kind + " version " + std::to_string(h.version) +
                      " (supported: " + std::to_string(kFormatVersion) + ")");
  return h;
}

std::uint64_t header_uint(const ArtifactHeader& h, std::string_view key) {
  const std::string& v = h.field(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw FormatError("line 1: field " + std::string(key) + " is not an unsigned integer: '" + v + "'");
  return out;
}

std::size_t parse_index(Reader& r, std::string_view text, std::string_view field) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    r.fail(std::string(field) + ": not an unsigned integer: '" + std::string(text) + "'");
  return out;
}

// Splits a record and checks its width; `tag` is the expected first cell, or empty for none.
std::vector<std::string_view> record(Reader& r, std::string_view what, std::string_view tag,
                                     std::size_t values) {
  auto cells = split(r.next(what), ',');
  std::size_t offset = 0;
  if (!tag.empty()) {
    if (cells.front() != tag) r.fail("expected a '" + std::string(tag) + "' record for " + std::string(what));
    offset = 1;
  }
  if (cells.size() != values + offset)
    r.fail(std::string(what) + ": expected " + std::to_string(values) + " values, found " +
           std::to_string(cells.size() - offset));
  return {cells.begin() + static_cast<std::ptrdiff_t>(offset), cells.end()};
}

double cell_number(Reader& r, std::string_view text, const std::string& field) {
  try {
    return parse_number(text, field);
  } catch (const FormatError& e) {
    r.fail(e.what());
  }
}

}  // namespace

const std::string& ArtifactHeader::field(std::string_view key) const {
  for (const auto& [k, v] : fields)
    if (k == key) return v;
  throw FormatError("line 1: " + kind + " header lacks field '" + std::string(key) + "'");
}

std::string number_cell(double value) {
  if (!std::isfinite(value)) throw InvalidArgument("cannot serialize a non-finite value");
  return format_number(value);
}

void AnalysisTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size())
    throw DimensionMismatch("table " + name + ": row has " + std::to_string(row.size()) +
                            " cells, expected " + std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

// ---- dataset ----

std::string serialize_dataset(const Dataset& d) {
  check_token(d.generator, "generator");
  if (d.parameters.find_first_of("\r\n") != std::string::npos)
    throw InvalidArgument("dataset parameters contain a line break");
  std::string out = header_line("dataset", {{"generator", d.generator},
                                            {"seed", std::to_string(d.seed)},
                                            {"count", std::to_string(d.samples.size())},
                                            {"latent_dim", std::to_string(d.latent_dim)},
                                            {"data_dim", std::to_string(d.data_dim)}});
  out += "#parameters " + d.parameters + '\n';
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= d.latent_dim; ++k) names.push_back("latent_" + std::to_string(k));
  for (std::size_t k = 1; k <= d.data_dim; ++k) names.push_back("data_" + std::to_string(k));
  append_csv(out, names);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    if (s.latent.size() != d.latent_dim || s.data.size() != d.data_dim)
      throw DimensionMismatch("dataset sample " + std::to_string(i) + " does not match the declared dimensions");
    Vector row = s.latent;
    row.insert(row.end(), s.data.begin(), s.data.end());
    append_csv(out, row);
  }
  return out;
}

Dataset parse_dataset(std::string_view text) {
  Reader r(text);
  const auto h = expect_header(r, "dataset");
  Dataset d;
  d.generator = h.field("generator");
  d.seed = header_uint(h, "seed");
  const std::size_t count = header_uint(h, "count");
  d.latent_dim = header_uint(h, "latent_dim");
  d.data_dim = header_uint(h, "data_dim");
  const auto params = r.next("parameters");
  constexpr std::string_view tag = "#parameters";
  if (params.substr(0, tag.size()) != tag) r.fail("expected a '#parameters' line");
  d.parameters = std::string(params.size() > tag.size() ? params.substr(tag.size() + 1) : "");
  record(r, "column names", "", d.latent_dim + d.data_dim);
  d.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto cells = record(r, "sample " + std::to_string(i), "", d.latent_dim + d.data_dim);
    ManifoldSample s;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const bool latent = k < d.latent_dim;
      const std::size_t idx = latent ? k + 1 : k - d.latent_dim + 1;
      const double v = cell_number(r, cells[k], (latent ? "latent_" : "data_") + std::to_string(idx));
      (latent ? s.latent : s.data).push_back(v);
    }
    d.samples.push_back(std::move(s));
  }
  r.expect_end();
  return d;
}

// ---- model ----

std::string serialize_model(const ChainNetwork& chain, std::uint64_t seed,
                            const std::optional<TrainingSchedule>& schedule) {
  for (std::size_t l = 0; l < chain.num_stages(); ++l) chain.stage(l).check_finite();
  std::string out = header_line("model", {{"seed", std::to_string(seed)},
                                          {"stages", std::to_string(chain.num_stages())},
                                          {"input_dim", std::to_string(chain.input_dim())}});
  out += "lambdas,";
  append_csv(out, chain.lambdas());
  if (schedule) {
    const auto& s = *schedule;
    s.validate(chain.num_stages());
    out += "schedule," + std::to_string(s.epochs) + ',' + std::to_string(s.batch_size) + ',' +
           number_cell(s.decay) + ',' + number_cell(s.init_range) + ',' + std::to_string(s.seed) + ',' +
           (s.full_backprop ? "1" : "0") + ',' + std::to_string(s.threads) + '\n';
    for (std::size_t l = 0; l < s.steps.size(); ++l)
      out += "steps," + std::to_string(l + 1) + ',' + number_cell(s.steps[l].weights) + ',' +
             number_cell(s.steps[l].biases) + ',' + number_cell(s.steps[l].recon) + ',' +
             std::to_string(s.decay_start[l]) + '\n';
  } else {
    out += "schedule,none\n";
  }
  for (std::size_t l = 0; l < chain.num_stages(); ++l) {
    const auto& s = chain.stage(l);
    out += "stage," + std::to_string(l + 1) + ',' + std::to_string(s.m()) + ',' + std::to_string(s.n()) +
           ',' + std::to_string(s.input_dim()) + '\n';
    for (std::size_t y = 0; y < s.m(); ++y) {
      out += "w,";
      append_csv(out, s.weights().row(y));
    }
    out += "b,";
    append_csv(out, s.biases());
    for (std::size_t y = 0; y < s.m(); ++y) {
      out += "r,";
      append_csv(out, s.recon().row(y));
    }
  }
  return out;
}

ModelArtifact parse_model(std::string_view text) {
  Reader r(text);
  const auto h = expect_header(r, "model");
  const std::uint64_t seed = header_uint(h, "seed");
  const std::size_t L = header_uint(h, "stages");
  const std::size_t input_dim = header_uint(h, "input_dim");
  if (L == 0) throw FormatError("line 1: model has no stages");

  Vector lambdas;
  const auto lcells = record(r, "lambdas", "lambdas", L);
  for (std::size_t l = 0; l < L; ++l)
    lambdas.push_back(cell_number(r, lcells[l], "lambda_" + std::to_string(l + 1)));

  std::optional<TrainingSchedule> schedule;
  const auto scells = split(r.next("schedule"), ',');
  if (scells.front() != "schedule") r.fail("expected a 'schedule' record");
  if (!(scells.size() == 2 && scells[1] == "none")) {
    if (scells.size() != 8) r.fail("schedule: expected 7 values, found " + std::to_string(scells.size() - 1));
    TrainingSchedule s;
    s.epochs = parse_index(r, scells[1], "epochs");
    s.batch_size = parse_index(r, scells[2], "batch_size");
    s.decay = cell_number(r, scells[3], "decay");
    s.init_range = cell_number(r, scells[4], "init_range");
    s.seed = parse_index(r, scells[5], "seed");
    if (scells[6] != "0" && scells[6] != "1") r.fail("full_backprop: expected 0 or 1");
    s.full_backprop = scells[6] == "1";
    s.threads = parse_index(r, scells[7], "threads");
    for (std::size_t l = 0; l < L; ++l) {
      const auto c = record(r, "steps of stage " + std::to_string(l + 1), "steps", 5);
      if (parse_index(r, c[0], "steps stage index") != l + 1) r.fail("steps records out of order");
      s.steps.push_back({cell_number(r, c[1], "weights step"), cell_number(r, c[2], "biases step"),
                         cell_number(r, c[3], "recon step")});
      s.decay_start.push_back(parse_index(r, c[4], "decay_start"));
    }
    try {
      s.validate(L);
    } catch (const InvalidArgument& e) {
      r.fail(std::string("schedule: ") + e.what());
    }
    schedule = std::move(s);
  }

  std::vector<SvqStage> stages;
  for (std::size_t l = 0; l < L; ++l) {
    const std::string name = "stage " + std::to_string(l + 1);
    const auto head = record(r, name + " header", "stage", 4);
    if (parse_index(r, head[0], "stage index") != l + 1) r.fail(name + ": stage index out of order");
    const std::size_t m = parse_index(r, head[1], "m");
    const std::size_t n = parse_index(r, head[2], "n");
    const std::size_t dim = parse_index(r, head[3], "input_dim");
    if (m == 0 || dim == 0) r.fail(name + ": m and input_dim must be positive");
    auto read_rows = [&](std::string_view tag, std::string_view field) {
      Matrix mat(m, dim);
      for (std::size_t y = 0; y < m; ++y) {
        const auto cells = record(r, name + " " + std::string(field) + " row " + std::to_string(y + 1), tag, dim);
        for (std::size_t k = 0; k < dim; ++k)
          mat(y, k) = cell_number(r, cells[k], name + " " + std::string(field) + "[" + std::to_string(y + 1) +
                                                     "," + std::to_string(k + 1) + "]");
      }
      return mat;
    };
    Matrix w = read_rows("w", "weights");
    Vector b;
    const auto bcells = record(r, name + " biases", "b", m);
    for (std::size_t y = 0; y < m; ++y)
      b.push_back(cell_number(r, bcells[y], name + " bias[" + std::to_string(y + 1) + "]"));
    Matrix rec = read_rows("r", "recon");
    try {
      stages.emplace_back(n, std::move(w), std::move(b), std::move(rec));
    } catch (const InvalidArgument& e) {
      r.fail(name + ": invariant violated: " + e.what());
    }
  }
  r.expect_end();
  if (stages.front().input_dim() != input_dim)
    throw FormatError("model: invariant violated: header input_dim " + std::to_string(input_dim) +
                      " differs from stage 1 input_dim " + std::to_string(stages.front().input_dim()));
  try {
    return {ChainNetwork(std::move(stages), std::move(lambdas)), seed, std::move(schedule)};
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model: invariant violated: ") + e.what());
  }
}

// ---- trace ----

std::string serialize_trace(const TrainingTrace& trace) {
  const std::size_t L = trace.epochs.empty() ? 0 : trace.epochs.front().stages.size();
  std::string out = header_line("trace", {{"stages", std::to_string(L)},
                                          {"epochs", std::to_string(trace.epochs.size())}});
  std::vector<std::string> names{"epoch"};
  for (std::size_t l = 1; l <= L; ++l) {
    const auto s = std::to_string(l);
    names.insert(names.end(), {"d1_" + s, "d2_" + s, "total_" + s});
  }
  names.push_back("weighted_total");
  append_csv(out, names);
  for (const auto& e : trace.epochs) {
    if (e.stages.size() != L) throw DimensionMismatch("trace epochs disagree on the number of stages");
    out += std::to_string(e.epoch) + ',';
    Vector row;
    for (const auto& s : e.stages) row.insert(row.end(), {s.d1, s.d2, s.total});
    row.push_back(e.weighted_total);
    append_csv(out, row);
  }
  return out;
}

TrainingTrace parse_trace(std::string_view text) {
  Reader r(text);
  const auto h = expect_header(r, "trace");
  const std::size_t L = header_uint(h, "stages");
  const std::size_t E = header_uint(h, "epochs");
  const std::size_t width = 3 * L + 2;
  record(r, "column names", "", width);
  TrainingTrace trace;
  for (std::size_t i = 0; i < E; ++i) {
    const auto cells = record(r, "epoch record " + std::to_string(i + 1), "", width);
    EpochRecord e;
    e.epoch = parse_index(r, cells[0], "epoch");
    for (std::size_t l = 0; l < L; ++l) {
      const auto s = std::to_string(l + 1);
      e.stages.push_back({cell_number(r, cells[1 + 3 * l], "d1_" + s), cell_number(r, cells[2 + 3 * l], "d2_" + s),
                          cell_number(r, cells[3 + 3 * l], "total_" + s)});
    }
    e.weighted_total = cell_number(r, cells[width - 1], "weighted_total");
    trace.epochs.push_back(std::move(e));
  }
  r.expect_end();
  return trace;
}

// ---- analysis ----

std::string serialize_table(const AnalysisTable& t) {
  std::vector<std::pair<std::string, std::string>> fields{{"name", t.name},
                                                          {"rows", std::to_string(t.rows.size())},
                                                          {"cols", std::to_string(t.columns.size())}};
  for (const auto& a : t.attributes) {
    if (a.first == "name" || a.first == "rows" || a.first == "cols")
      throw InvalidArgument("table attribute '" + a.first + "' is reserved");
    fields.push_back(a);
  }
  std::string out = header_line("analysis", fields);
  for (const auto& c : t.columns) check_cell(c);
  append_csv(out, t.columns);
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw DimensionMismatch("table " + t.name + ": ragged row");
    for (const auto& c : row) check_cell(c);
    append_csv(out, row);
  }
  return out;
}

AnalysisTable parse_table(std::string_view text) {
  Reader r(text);
  const auto h = expect_header(r, "analysis");
  AnalysisTable t;
  t.name = h.field("name");
  const std::size_t rows = header_uint(h, "rows");
  const std::size_t cols = header_uint(h, "cols");
  for (const auto& f : h.fields)
    if (f.first != "name" && f.first != "rows" && f.first != "cols") t.attributes.push_back(f);
  for (auto c : record(r, "column names", "", cols)) t.columns.emplace_back(c);
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<std::string> row;
    for (auto c : record(r, "row " + std::to_string(i + 1), "", cols)) row.emplace_back(c);
    t.rows.push_back(std::move(row));
  }
  r.expect_end();
  return t;
}

// ---- files ----

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

template <class F>
auto with_path(const std::filesystem::path& path, F&& parse) {
  try {
    return parse(read_text_file(path));
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw FormatError(path.string() + ": " + msg);
  }
}

}  // namespace

ArtifactHeader read_header(const std::filesystem::path& path) {
  return with_path(path, [](const std::string& text) {
    Reader r(text);
    return parse_header_line(r.next("header"));
  });
}

void save_dataset(const std::filesystem::path& path, const Dataset& d) { write_text_file(path, serialize_dataset(d)); }
void save_model(const std::filesystem::path& path, const ChainNetwork& chain, std::uint64_t seed,
                const std::optional<TrainingSchedule>& schedule) {
  write_text_file(path, serialize_model(chain, seed, schedule));
}
void save_trace(const std::filesystem::path& path, const TrainingTrace& t) { write_text_file(path, serialize_trace(t)); }
void save_table(const std::filesystem::path& path, const AnalysisTable& t) { write_text_file(path, serialize_table(t)); }

Dataset load_dataset(const std::filesystem::path& path) {
  return with_path(path, [](const std::string& s) { return parse_dataset(s); });
}
ModelArtifact load_model(const std::filesystem::path& path) {
  return with_path(path, [](const std::string& s) { return parse_model(s); });
}
TrainingTrace load_trace(const std::filesystem::path& path) {
  return with_path(path, [](const std::string& s) { return parse_trace(s); });
}
AnalysisTable load_table(const std::filesystem::path& path) {
  return with_path(path, [](const std::string& s) { return parse_table(s); });
}

}  // namespace svq
