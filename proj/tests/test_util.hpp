#pragma once

#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "hetcur/error.hpp"

namespace hetcur::testing {

inline std::string source_path(const std::string& rel) { return std::string(HETCUR_SOURCE_DIR) + "/" + rel; }

inline std::string default_map_path() { return source_path("maps/mwh_grid.txt"); }
inline std::string small_map_path() { return source_path("maps/mwh_small.txt"); }

// Runs `f` and returns the error code it threw, failing the test if it did not throw hetcur::Error.
inline ::testing::AssertionResult throws_code(const std::function<void()>& f, Errc expected) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == expected) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "threw " << to_string(e.code()) << " (" << e.what() << "), expected "
                                         << to_string(expected);
  }
  return ::testing::AssertionFailure() << "did not throw, expected " << to_string(expected);
}

}  // namespace hetcur::testing

#define EXPECT_ERRC(stmt, code) EXPECT_TRUE(::hetcur::testing::throws_code([&] { (void)(stmt); }, (code)))
