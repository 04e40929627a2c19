#include <doctest.h>

#include <cmath>
#include <limits>

#include "nesy/csv.hpp"
#include "nesy/error.hpp"
#include "nesy/numeric.hpp"

using namespace nesy;

TEST_CASE("csv quoting round trip") {
  CsvTable t{{"name", "note"}, {}};
  t.add_row({"plain", "1.5"});
  t.add_row({"with,comma", "say \"hi\""});
  t.add_row({"multi\nline", ""});
  const std::string text = to_csv(t);
  CHECK(text.rfind("name,note\nplain,1.5\n\"with,comma\",\"say \"\"hi\"\"\"\n", 0) == 0);
  const CsvTable back = parse_csv(text);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("note") == 1);
  CHECK_THROWS_AS(back.column("missing"), SchemaError);
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-4.39) == "-4.39");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  const double x = 1.0 / 3.0;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("log_sum_exp and sigmoid") {
  const double xs[] = {std::log(1.0), std::log(2.0), std::log(3.0)};
  CHECK(log_sum_exp(xs) == doctest::Approx(std::log(6.0)).epsilon(1e-15));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
}
