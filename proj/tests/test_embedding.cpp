#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "biasdet/embedding.hpp"
#include "biasdet/errors.hpp"
#include "biasdet/rng.hpp"

using namespace biasdet;

namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& contents) {
    path = std::filesystem::temp_directory_path() /
           ("biasdet_emb_test_" + std::to_string(counter++));
    std::ofstream out(path, std::ios::binary);
    out << contents;
  }
  ~TempFile() { std::filesystem::remove(path); }
  static int counter;
};
int TempFile::counter = 0;

}  // namespace

TEST_CASE("rows are read for vocabulary tokens in vocabulary order") {
  TempFile f(
      "cat 1.0 2.0 3.0\n"
      "dog -1.5 0.25 4.0\n"
      "ignored 9 9 9\n");
  auto emb = load_embedding_file(f.path.string(), {"dog", "cat"}, 3, 0);
  REQUIRE(emb.rows.rows() == 2);
  REQUIRE(emb.rows.cols() == 3);
  CHECK(emb.rows(0, 0) == -1.5f);
  CHECK(emb.rows(0, 2) == 4.0f);
  CHECK(emb.rows(1, 0) == 1.0f);
  CHECK(emb.rows(1, 1) == 2.0f);
  CHECK(emb.found == 2);
  CHECK(emb.missing == 0);
}

TEST_CASE("vocabulary tokens absent from the file get seeded rows") {
  TempFile f("cat 1 2\n");
  auto emb = load_embedding_file(f.path.string(), {"cat", "novel"}, 2, 99);
  CHECK(emb.found == 1);
  CHECK(emb.missing == 1);
  // The fill draws from Rng(seed) with sigma 0.1, in vocabulary order.
  Rng rng(99);
  CHECK(emb.rows(1, 0) == static_cast<float>(rng.normal(0.0, 0.1)));
  CHECK(emb.rows(1, 1) == static_cast<float>(rng.normal(0.0, 0.1)));
  // Same seed, same fill.
  auto again = load_embedding_file(f.path.string(), {"cat", "novel"}, 2, 99);
  CHECK(again.rows == emb.rows);
}

TEST_CASE("dimension mismatch reports the line number") {
  TempFile f(
      "good 1 2 3\n"
      "short 1 2\n");
  try {
    load_embedding_file(f.path.string(), {"good"}, 3, 0);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  TempFile g("long 1 2 3 4\n");
  CHECK_THROWS_AS(load_embedding_file(g.path.string(), {"long"}, 3, 0),
                  FormatError);
}

TEST_CASE("bad numbers and missing files raise errors") {
  TempFile f("word 1.0 banana\n");
  CHECK_THROWS_AS(load_embedding_file(f.path.string(), {"word"}, 2, 0),
                  FormatError);
  CHECK_THROWS_AS(load_embedding_file("/nonexistent/vectors.txt", {"a"}, 2, 0),
                  IoError);
}

TEST_CASE("blank lines and windows line endings are tolerated") {
  TempFile f("cat 1 2\r\n\ndog 3 4\n");
  auto emb = load_embedding_file(f.path.string(), {"cat", "dog"}, 2, 0);
  CHECK(emb.found == 2);
  CHECK(emb.rows(0, 1) == 2.0f);
  CHECK(emb.rows(1, 0) == 3.0f);
}

TEST_CASE("duplicate file rows keep the last value, counted once") {
  TempFile f(
      "cat 1 1\n"
      "cat 7 7\n");
  auto emb = load_embedding_file(f.path.string(), {"cat"}, 2, 0);
  CHECK(emb.found == 1);
  CHECK(emb.rows(0, 0) == 7.0f);
}
