#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "svq/errors.hpp"
#include "svq/persistence.hpp"
#include "svq/text.hpp"

using namespace svq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "svq_persistence_tests";
  fs::create_directories(dir);
  return dir / name;
}

ChainNetwork sample_chain(std::uint64_t seed) {
  const std::size_t sizes[] = {8, 16, 8, 4};
  const std::size_t ns[] = {20, 20, 20};
  auto c = ChainNetwork::zeros(sizes, ns, {1.0, 5.0, 0.1});
  randomize_parameters(c, 0.7, seed);
  return c;
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Text, NumbersRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(parse_number(format_number(v), "v"), v);
  }
  EXPECT_THROW(parse_number("1.5x", "f"), FormatError);
  EXPECT_THROW(parse_number("nan", "f"), FormatError);
  EXPECT_THROW(parse_number("", "f"), FormatError);
}

TEST(Persistence, ModelRoundTripIsExact) {
  const auto c = sample_chain(3);
  auto schedule = default_schedule(3, 100, 0.5);
  schedule.seed = 44;
  const auto path = scratch("model.txt");
  save_model(path, c, 44, schedule);
  const auto loaded = load_model(path);
  EXPECT_EQ(loaded.chain, c);
  EXPECT_EQ(loaded.seed, 44u);
  ASSERT_TRUE(loaded.schedule.has_value());
  EXPECT_EQ(*loaded.schedule, schedule);
  const Vector x{0.1, 0.9, -0.3, 0.4, 1.0, 0.0, -1.0, 0.5};
  EXPECT_EQ(feedforward(loaded.chain, x), feedforward(c, x));
  EXPECT_EQ(serialize_model(loaded.chain, loaded.seed, loaded.schedule), read_text_file(path));
}

TEST(Persistence, ModelWithoutSchedule) {
  const auto c = sample_chain(4);
  const auto m = parse_model(serialize_model(c, 9));
  EXPECT_EQ(m.chain, c);
  EXPECT_FALSE(m.schedule.has_value());
}

TEST(Persistence, DatasetRoundTripAndRegeneration) {
  const auto d = make_phase_dataset(12, 300);
  const auto path = scratch("dataset.txt");
  save_dataset(path, d);
  const auto loaded = load_dataset(path);
  EXPECT_EQ(loaded, d);
  const auto h = read_header(path);
  EXPECT_EQ(h.kind, "dataset");
  EXPECT_EQ(h.field("seed"), "12");
  const auto regenerated = make_dataset(loaded.generator, std::stoull(h.field("seed")), loaded.samples.size(),
                                        loaded.parameters);
  EXPECT_EQ(regenerated, loaded);
  EXPECT_EQ(serialize_dataset(loaded), read_text_file(path));

  const auto blobs = make_blob_dataset(1, 40, {{0.25, -1.0}, {2.0, 3.5}}, 0.3);
  EXPECT_EQ(parse_dataset(serialize_dataset(blobs)), blobs);
}

TEST(Persistence, TraceRoundTrip) {
  TrainingTrace t;
  for (std::size_t e = 0; e < 5; ++e)
    t.epochs.push_back({e, {{0.1 * e, 0.2, 0.3}, {1.0 / 3.0, 2.0, 7e-300}}, 1.0 / (e + 1.0)});
  const auto text = serialize_trace(t);
  EXPECT_EQ(parse_trace(text), t);
  EXPECT_EQ(serialize_trace(parse_trace(text)), text);
  EXPECT_TRUE(parse_trace(serialize_trace(TrainingTrace{})).epochs.empty());
}

TEST(Persistence, TableRoundTrip) {
  AnalysisTable t{"demo", {{"layers", "8:16:8:4"}}, {"a", "b"}, {}};
  t.add_row({"x", number_cell(0.1)});
  t.add_row({"~x2 & x3", number_cell(-2.5e-8)});
  const auto text = serialize_table(t);
  EXPECT_EQ(parse_table(text), t);
  EXPECT_THROW(t.add_row({"only one"}), DimensionMismatch);
  EXPECT_THROW(number_cell(std::numeric_limits<double>::infinity()), InvalidArgument);
}

TEST(Persistence, NonFiniteValuesRejectedOnSave) {
  TrainingTrace t;
  t.epochs.push_back({0, {{std::nan(""), 0.0, 0.0}}, 0.0});
  EXPECT_THROW(serialize_trace(t), InvalidArgument);
}

TEST(Persistence, UnsupportedVersion) {
  auto text = serialize_model(sample_chain(1), 1);
  text.replace(text.find(" v1 "), 4, " v2 ");
  const auto msg = error_of([&] { parse_model(text); });
  EXPECT_NE(msg.find("unsupported model version 2"), std::string::npos) << msg;
}

TEST(Persistence, WrongKindAndMalformedHeader) {
  const auto text = serialize_trace(TrainingTrace{});
  EXPECT_NE(error_of([&] { parse_model(text); }).find("expected a model artifact"), std::string::npos);
  EXPECT_NE(error_of([&] { parse_model("hello\n"); }).find("line 1"), std::string::npos);
}

TEST(Persistence, TruncatedFileNamesByteOffset) {
  const auto text = serialize_model(sample_chain(2), 1);
  const auto cut = text.substr(0, text.size() / 2);
  const auto msg = error_of([&] { parse_model(cut); });
  EXPECT_NE(msg.find("byte"), std::string::npos) << msg;
  const auto cut_at_line = text.substr(0, text.find('\n', text.size() / 2) + 1);
  const auto msg2 = error_of([&] { parse_model(cut_at_line); });
  EXPECT_NE(msg2.find("byte"), std::string::npos) << msg2;
}

TEST(Persistence, DimensionMismatchIsInvariantViolation) {
  auto text = serialize_model(sample_chain(2), 1);
  const auto pos = text.find("stage,2,8,20,16");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 15, "stage,2,8,20,15");
  const auto msg = error_of([&] { parse_model(text); });
  EXPECT_FALSE(msg.empty());
  EXPECT_NE(msg.find("line"), std::string::npos) << msg;
}

TEST(Persistence, BadNumberNamesLineAndField) {
  auto text = serialize_dataset(make_circle_dataset(1, 5));
  const auto pos = text.rfind('\n', text.size() - 2);
  text.insert(pos + 1, "abc");
  const auto msg = error_of([&] { parse_dataset(text); });
  EXPECT_NE(msg.find("line "), std::string::npos) << msg;
}

TEST(Persistence, LoadPrefixesPathAndMissingFile) {
  const auto path = scratch("broken.txt");
  std::ofstream(path) << "#svqchain model v1\n";
  const auto msg = error_of([&] { load_model(path); });
  EXPECT_NE(msg.find(path.string()), std::string::npos) << msg;
  EXPECT_THROW(load_model(scratch("does-not-exist.txt")), FormatError);
}

TEST(Persistence, UnwritablePath) {
  const auto blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  EXPECT_THROW(save_trace(blocker / "sub" / "trace.txt", TrainingTrace{}), Error);
}
