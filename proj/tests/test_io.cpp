#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <vector>

#include "entroflow/fokker_planck.hpp"
#include "entroflow/io.hpp"

using namespace entroflow;

TEST_CASE("doubles round-trip through text") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        CHECK(std::stod(io::format_double(v)) == v);
    }
    CHECK(io::format_double(1.0 / 3.0) == "0.33333333333333331");
    CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("CSV quoting follows RFC 4180") {
    std::ostringstream out;
    io::CsvWriter w(out);
    w.header({"name", "value"});
    w.field(std::string_view("a,b")).field(1.5);
    w.end_row();
    w.field(std::string_view("say \"hi\"")).field(std::size_t{7});
    w.end_row();
    CHECK(out.str() == "name,value\n\"a,b\",1.5\n\"say \"\"hi\"\"\",7\n");

    std::istringstream in(out.str());
    const auto rows = io::read_csv(in);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][0] == "a,b");
    CHECK(rows[2][0] == "say \"hi\"");
    CHECK(rows[2][1] == "7");
}

TEST_CASE("density field round trip") {
    const Grid g(Interval{-4.0, 4.0}, 32);
    FokkerPlanckOptions o;
    o.horizon = 0.1;
    o.dt = 0.05;
    const DensityField f = solve_fokker_planck(builtin_potential("quadratic", {}), gaussian_slice(g, 0.5, 1.0), g, o);
    std::ostringstream csv;
    io::Json header;
    io::write_density(f, csv, header);
    std::istringstream in(csv.str());
    const DensityField back = io::read_density(in, header);
    CHECK(back.grid == f.grid);
    CHECK(back.times == f.times);
    CHECK(back.slices == f.slices);
}

TEST_CASE("SHA-256 of a known file") {
    const auto path = std::filesystem::temp_directory_path() / "entroflow_sha_test.txt";
    io::write_text(path, "abc");
    CHECK(io::sha256_file(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    io::write_text(path, "");
    CHECK(io::sha256_file(path) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    std::filesystem::remove(path);
}
