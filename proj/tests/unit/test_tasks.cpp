#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "metabayes/errors.hpp"
#include "metabayes/tasks/bandit.hpp"
#include "metabayes/tasks/batch.hpp"
#include "metabayes/tasks/dataset.hpp"
#include "metabayes/tasks/families.hpp"
#include "metabayes/tasks/rng.hpp"

using namespace metabayes;

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(SeededRng::philox({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(SeededRng::philox({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(SeededRng::philox({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("SeededRng determinism and state round trip") {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  SeededRng c(a.state());
  CHECK(c.normal() == a.normal());
  CHECK(SeededRng(42).next_u64() != SeededRng(43).next_u64());
  CHECK(a.substream(1).next_u64() != a.substream(2).next_u64());
  CHECK(a.substream(1).next_u64() == a.substream(1).next_u64());
}

TEST_CASE("SeededRng samplers have the right moments") {
  SeededRng rng(1);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, se = 0, sg = 0, sb = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    se += rng.exponential(0.5);
    sg += rng.gamma(0.3);
    sb += rng.beta(2.0, 5.0);
  }
  CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sn / n) < 4 / std::sqrt(n));
  CHECK(std::abs(sn2 / n - 1.0) < 4 * std::sqrt(2.0 / n));
  CHECK(std::abs(se / n - 2.0) < 4 * 2.0 / std::sqrt(n));
  CHECK(std::abs(sg / n - 0.3) < 4 * std::sqrt(0.3 / n));
  CHECK(std::abs(sb / n - 2.0 / 7) < 4 * std::sqrt(10.0 / 49 / 8 / n));
}

TEST_CASE("uniform_index is unbiased and in range") {
  SeededRng rng(3);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) ++counts.at(rng.uniform_index(7));
  for (int c : counts) CHECK(std::abs(c - 10000) < 4 * std::sqrt(10000.0 * 6 / 7));
}

TEST_CASE("sample_task") {
  SUBCASE("degenerate prior pins the latent") {
    GaussianTaskFamily f{.prior_sd = 1e-12};
    SeededRng rng(0);
    for (int i = 0; i < 100; ++i) CHECK(std::abs(sample_task(f, rng).latent - 10.0) < 1e-9);
  }
  SUBCASE("latent mean within the CLT bound") {
    GaussianTaskFamily f;
    SeededRng rng(0);
    const int n = 100000;
    double s = 0, s2 = 0, resid = 0, resid2 = 0;
    for (int i = 0; i < n; ++i) {
      TaskSample t = sample_task(f, rng);
      REQUIRE(t.observations.size() == f.seq_len + 1);
      s += t.latent;
      s2 += t.latent * t.latent;
      const double r = t.observations(0) - t.latent;
      resid += r;
      resid2 += r * r;
    }
    CHECK(std::abs(s / n - 10.0) < 3 * 3.0 / std::sqrt(n));
    CHECK(std::abs(std::sqrt(s2 / n - (s / n) * (s / n)) - 3.0) < 4 * 3.0 / std::sqrt(2.0 * n));
    CHECK(std::abs(resid / n) < 3 * 2.0 / std::sqrt(n));
    CHECK(std::abs(std::sqrt(resid2 / n) - 2.0) < 4 * 2.0 / std::sqrt(2.0 * n));
  }
  SUBCASE("seed 42 twice gives the same sample") {
    SeededRng a(42), b(42);
    TaskSample x = sample_task(GaussianTaskFamily{}, a);
    TaskSample y = sample_task(GaussianTaskFamily{}, b);
    CHECK(x.latent == y.latent);
    CHECK(x.observations == y.observations);
  }
  SUBCASE("exponential prior draws positive latents with the right mean") {
    ExponentialPriorTaskFamily f;
    SeededRng rng(5);
    double s = 0;
    for (int i = 0; i < 100000; ++i) {
      const double mu = sample_task(f, rng).latent;
      REQUIRE(mu > 0.0);
      s += mu;
    }
    CHECK(std::abs(s / 100000 - 10.0) < 4 * 10.0 / std::sqrt(100000.0));
  }
  SUBCASE("invalid families are rejected") {
    SeededRng rng(0);
    CHECK_THROWS_AS(sample_task(GaussianTaskFamily{.prior_sd = 0.0}, rng), ValidationError);
    CHECK_THROWS_AS(sample_task(GaussianTaskFamily{.likelihood_sd = -1.0}, rng), ValidationError);
    CHECK_THROWS_AS(sample_task(GaussianTaskFamily{.seq_len = 0}, rng), ValidationError);
    CHECK_THROWS_AS(sample_task(ExponentialPriorTaskFamily{.prior_rate = 0.0}, rng), ValidationError);
  }
}

TEST_CASE("prior_log_density is normalized") {
  auto g = prior_log_density(GaussianTaskFamily{});
  CHECK(g(10.0) == doctest::Approx(-std::log(3.0) - 0.5 * std::log(2 * M_PI)));
  auto e = prior_log_density(ExponentialPriorTaskFamily{});
  CHECK(e(2.0) == doctest::Approx(std::log(0.1) - 0.2));
  CHECK(std::isinf(e(-1.0)));
}

TEST_CASE("sample_bandit_task") {
  SUBCASE("uniform prior mean") {
    SeededRng rng(0);
    double s = 0;
    for (int i = 0; i < 50000; ++i) {
      BanditTask t = sample_bandit_task({{1.0, 1.0}}, 2, 10, rng);
      s += t.success_probabilities[0] + t.success_probabilities[1];
    }
    CHECK(std::abs(s / 100000 - 0.5) < 0.005);
  }
  SUBCASE("concentrated prior") {
    SeededRng rng(0);
    for (int i = 0; i < 1000; ++i) CHECK(sample_bandit_task({{1e6, 1.0}}, 2, 3, rng).success_probabilities[1] > 0.99);
  }
  SUBCASE("fixed seed gives the same task") {
    SeededRng a(9), b(9);
    CHECK(sample_bandit_task({{2.0, 3.0}, {1.0, 1.0}}, 2, 5, a).success_probabilities ==
          sample_bandit_task({{2.0, 3.0}, {1.0, 1.0}}, 2, 5, b).success_probabilities);
  }
  SUBCASE("bad parameters") {
    SeededRng rng(0);
    CHECK_THROWS_AS(sample_bandit_task({{0.0, 1.0}}, 2, 3, rng), ValidationError);
    CHECK_THROWS_AS(sample_bandit_task({{1.0, 1.0}}, 2, 0, rng), ValidationError);
    CHECK_THROWS_AS(sample_bandit_task({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}, 2, 3, rng), ValidationError);
  }
}

TEST_CASE("sample dataset parsing") {
  SUBCASE("happy path") {
    std::string text = "T=10,count=3\n# source: hand made\n";
    for (int r = 0; r < 3; ++r) text += "1,2,3,4,5,6,7,8,9,10,11\n";
    SampleDataset d = parse_sample_dataset(text);
    CHECK(d.count() == 3);
    CHECK(d.seq_len() == 10);
    CHECK(d.source() == "hand made");
    CHECK(d.sequence(2)(10) == 11.0);
  }
  auto line_of = [](const std::string& text) -> long {
    try {
      parse_sample_dataset(text);
    } catch (const ParseError& e) {
      return static_cast<long>(e.line());
    }
    return -1;
  };
  SUBCASE("ragged row names its line") { CHECK(line_of("T=2,count=3\n1,2,3\n1,2\n1,2,3\n") == 3); }
  SUBCASE("non-numeric value") { CHECK(line_of("T=1,count=2\n1,2\n1,abc\n") == 3); }
  SUBCASE("bad header") { CHECK(line_of("count=2\n1,2\n") == 1); }
  SUBCASE("row count mismatch") { CHECK(line_of("T=1,count=3\n1,2\n1,2\n") > 0); }
  SUBCASE("non-finite value") { CHECK(line_of("T=1,count=1\n1,nan\n") == 2); }
}

TEST_CASE("dataset export round trip") {
  SeededRng rng(4);
  SampleDataset d = export_sample_dataset(GaussianTaskFamily{}, 20, rng);
  const auto path = std::filesystem::temp_directory_path() / "metabayes_dataset_roundtrip.csv";
  save_sample_dataset(d, path);
  SampleDataset back = load_sample_dataset(path);
  std::filesystem::remove(path);
  CHECK(back.sequences() == d.sequences());
  CHECK(back.seq_len() == 10);
  CHECK_THROWS_AS(load_sample_dataset(path), ValidationError);
}

TEST_CASE("next_batch") {
  SUBCASE("generative, N = 1") {
    BatchSource src(GaussianTaskFamily{}, SeededRng(1));
    SequenceBatch b = src.next_batch(1);
    CHECK(b.size() == 1);
    CHECK(b.observations.rows() == 11);
    CHECK(b.latents.has_value());
  }
  SUBCASE("single-sequence dataset resamples with replacement") {
    Matrix seq(1, 3);
    seq << 1, 2, 3;
    SampleDataset d(seq, "one");
    BatchSource src(d, SeededRng(1));
    SequenceBatch b = src.next_batch(4);
    CHECK(b.size() == 4);
    CHECK_FALSE(b.latents.has_value());
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(b.observations.col(j) == seq.row(0).transpose());
  }
  SUBCASE("same rng snapshot gives the same batch") {
    BatchSource src(ExponentialPriorTaskFamily{}, SeededRng(2));
    src.next_batch(3);
    const SeededRng snap = src.rng();
    SequenceBatch a = src.next_batch(8);
    src.set_rng(snap);
    SequenceBatch b = src.next_batch(8);
    CHECK(a.observations == b.observations);
  }
}
