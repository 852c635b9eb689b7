// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <numeric>
#include <set>

#include "chartground/error.hpp"
#include "chartground/hashing.hpp"
#include "chartground/random.hpp"
#include "chartground/sampling.hpp"

using namespace chartground;

namespace {

std::vector<double> first_pick_frequencies(const std::vector<double>& w, int draws) {
  std::vector<double> freq(w.size());
  for (int s = 0; s < draws; ++s) {
    freq[weighted_sample_without_replacement(w, 1, static_cast<std::uint64_t>(s)).front()] += 1.0;
  }
  for (auto& f : freq) f /= draws;
  return freq;
}

}  // namespace

TEST_CASE("known hash vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  const std::string text = "Man";
  CHECK(base64_encode({reinterpret_cast<const unsigned char*>(text.data()), text.size()}) == "TWFu");
  const unsigned char two[] = {'M', 'a'};
  CHECK(base64_encode(two) == "TWE=");
}

TEST_CASE("seed derivation separates streams") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("uniform helpers stay in range") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform_unit(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(uniform_index(rng, 7) < 7);
  }
}

TEST_CASE("two-record pool follows the weights") {
  const auto f = first_pick_frequencies({0.1, 0.9}, 100000);
  CHECK(std::abs(f[0] - 0.1) <= 0.02);
  CHECK(std::abs(f[1] - 0.9) <= 0.02);
}

TEST_CASE("equal weights sample uniformly") {
  const auto f = first_pick_frequencies(std::vector<double>(5, 0.3), 100000);
  for (double x : f) CHECK(std::abs(x - 0.2) <= 0.02);
}

TEST_CASE("weights 1..4 reproduce proportional first picks") {
  const auto f = first_pick_frequencies({1, 2, 3, 4}, 100000);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(f[i] - (i + 1) / 10.0) <= 0.02);
}

TEST_CASE("full draw is a permutation and draws are deterministic") {
  const std::vector<double> w{0.5, 0.2, 0.9, 0.01, 0.3};
  const auto all = weighted_sample_without_replacement(w, w.size(), 11);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == w.size());
  CHECK(weighted_sample_without_replacement(w, 3, 11) == weighted_sample_without_replacement(w, 3, 11));
  // A shorter draw is a prefix of the longer one under the same seed.
  const auto three = weighted_sample_without_replacement(w, 3, 11);
  CHECK(std::equal(three.begin(), three.end(), all.begin()));
  CHECK(weighted_sample_without_replacement(w, 0, 11).empty());
}

TEST_CASE("sampling errors") {
  const std::vector<double> w{1.0, 2.0};
  try {
    weighted_sample_without_replacement(w, 3, 1);
    FAIL("expected InsufficientRecords");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientRecords);
  }
  for (double bad : {0.0, -1.0, std::numeric_limits<double>::infinity()}) {
    const std::vector<double> v{1.0, bad};
    try {
      weighted_sample_without_replacement(v, 1, 1);
      FAIL("expected InvalidArgument");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
    }
  }
}
