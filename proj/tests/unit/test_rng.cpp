#include <doctest.h>

#include "fvlab/rng.hpp"

#include <set>

using namespace fvlab;

TEST_SUITE("rng") {
  TEST_CASE("philox known-answer vectors") {
    using B = Philox4x32::Block;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::encrypt(B{0, 0, 0, 0}, K{0, 0}) ==
          B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::encrypt(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                              K{0xffffffff, 0xffffffff}) ==
          B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::encrypt(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                              K{0xa4093822, 0x299f31d0}) ==
          B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("streams are reproducible and distinct") {
    Stream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 100; ++i) {
      const auto x = a();
      CHECK(x == b());
      CHECK(x != c());
      CHECK(x != d());
    }
  }

  TEST_CASE("derived ids do not collide on small index ranges") {
    std::set<std::uint64_t> ids;
    for (std::uint64_t p = 0; p < 4; ++p)
      for (std::uint64_t i = 0; i < 2000; ++i) ids.insert(derive_stream_id(p, i));
    CHECK(ids.size() == 8000);
  }

  TEST_CASE("uniform_open stays inside (0, 1) with the right mean") {
    Stream s(1, 0);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = uniform_open(s);
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));
  }
}
