#include "catch_amalgamated.hpp"

#include <filesystem>

#include "subbeam/codebook_io.hpp"

using namespace subbeam;

namespace {

Codebook sample_book() {
  const auto g = ArrayGeometry::ula(8);
  std::vector<UserLink> users{{deg2rad(-20.0), 2.0}, {deg2rad(15.0), 0.5}};
  std::vector<double> az{deg2rad(-5.0), deg2rad(5.0)};
  return build_codebook(users, azimuth_sweep(g, az), 1.0, g);
}

}  // namespace

TEST_CASE("codebook text round trip preserves weights exactly") {
  const auto book = sample_book();
  const auto text = codebook_to_string(book);
  CHECK(text.rfind("# subbeam-codebook v1\n", 0) == 0);
  const auto back = codebook_from_string(text);
  CHECK(back.geometry == book.geometry);
  CHECK(back.epsilon == book.epsilon);
  REQUIRE(back.users.size() == book.users.size());
  REQUIRE(back.entries.size() == book.entries.size());
  for (std::size_t m = 0; m < book.entries.size(); ++m) {
    CHECK(back.entries[m].weights == book.entries[m].weights);
    CHECK(back.entries[m].status == book.entries[m].status);
    CHECK(back.entries[m].iterations == book.entries[m].iterations);
    CHECK(back.entries[m].gamma_min == Catch::Approx(book.entries[m].gamma_min).epsilon(1e-14));
  }
  // Re-serialization is a fixed point after one pass.
  const auto text2 = codebook_to_string(back);
  CHECK(codebook_to_string(codebook_from_string(text2)) == text2);
}

TEST_CASE("planar geometry and empty users round trip") {
  Codebook book;
  book.geometry = ArrayGeometry::planar(2, 3, 0.45);
  CodebookEntry e;
  e.sensing = Direction{deg2rad(4.0), deg2rad(-3.0)};
  e.weights = conjugate_beam(book.geometry, e.sensing);
  book.entries.push_back(e);
  const auto back = codebook_from_string(codebook_to_string(book));
  CHECK(back.geometry == book.geometry);
  CHECK(back.users.empty());
  CHECK(std::isinf(back.entries[0].gamma_min));
  REQUIRE(back.entries[0].sensing.elevation.has_value());
  CHECK(*back.entries[0].sensing.elevation == Catch::Approx(deg2rad(-3.0)));
}

TEST_CASE("file save and load") {
  const auto path = std::filesystem::temp_directory_path() / "subbeam_test_codebook.txt";
  const auto book = sample_book();
  save_codebook(path.string(), book);
  CHECK(codebook_to_string(load_codebook(path.string())) ==
        codebook_to_string(codebook_from_string(codebook_to_string(book))));
  std::filesystem::remove(path);
}

TEST_CASE("malformed codebooks are rejected") {
  const auto text = codebook_to_string(sample_book());
  CHECK_THROWS_AS(codebook_from_string("# subbeam-codebook v9\n"), std::invalid_argument);
  CHECK_THROWS_AS(codebook_from_string(text.substr(0, text.size() / 2)), std::invalid_argument);
  std::string bad = text;
  bad.replace(bad.find("epsilon"), 7, "epsilom");
  CHECK_THROWS_AS(codebook_from_string(bad), std::invalid_argument);
  std::string bad_w = text;
  const auto pos = bad_w.find("\nw ") + 3;
  bad_w.replace(pos, 1, "x");
  CHECK_THROWS_AS(codebook_from_string(bad_w), std::invalid_argument);
}
