#include "support.hpp"

#include "tiledrop/config.hpp"
#include "tiledrop/errors.hpp"
#include "tiledrop/worldgen.hpp"

#include <Eigen/Dense>
#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

using namespace tiledrop;

TEST_CASE("generation is a pure function of config and seed")
{
    const auto cfg = testsupport::small_config();
    const World a = generate_world(cfg, 7);
    const World b = generate_world(cfg, 7);
    CHECK(a == b);
    CHECK(serialize_world(a) == serialize_world(b));
    CHECK(generate_world(cfg, 7, 4) == a);
    CHECK_FALSE(generate_world(cfg, 8) == a);
    validate_world(a);
}

TEST_CASE("zero intensity yields empty tiles and a noise-only index")
{
    auto cfg = testsupport::small_config(6);
    cfg.class_amplitudes.assign(10, 0.0);
    cfg.background.assign(10, 0.0);
    cfg.y_noise = 0.0;
    const World w = generate_world(cfg, 3);
    for (const auto& cl : w.clusters) {
        CHECK(cl.y == 0.0);
        for (const auto& t : cl.tiles)
            for (const auto& st : t.subtiles) CHECK(st.truth.is_zero());
    }

    cfg.y_noise = 0.1;
    auto other = cfg;
    other.w_star.assign(10, 5.0);
    const World noisy = generate_world(cfg, 3);
    const World reweighted = generate_world(other, 3);
    for (std::size_t i = 0; i < noisy.clusters.size(); ++i) {
        CHECK(noisy.clusters[i].y != 0.0);
        CHECK(noisy.clusters[i].y == reweighted.clusters[i].y);
    }
}

TEST_CASE("low-resolution channel 0 is informative about tile counts")
{
    GenConfig cfg;
    const World w = generate_world(cfg, 7);
    const double corr = testsupport::cluster_mean_feature_corr(w, 0);
    CHECK(corr > 0.5);
    // Regression fixture measured on (defaults, seed 7).
    CHECK(corr == doctest::Approx(0.6369).epsilon(5e-4));

    cfg.lr_noise = 1e4;
    CHECK(std::abs(testsupport::cluster_mean_feature_corr(generate_world(cfg, 7), 0)) < 0.1);
}

TEST_CASE("greenness channel is anti-correlated with counts")
{
    const World w = generate_world(testsupport::small_config(40), 7);
    CHECK(testsupport::cluster_mean_feature_corr(w, 7) < -0.3);
}

TEST_CASE("subtile counts are Poisson with the configured mean")
{
    auto cfg = testsupport::small_config(40);  // 40 * 64 * 4 = 10240 subtiles
    cfg.bumps_min = cfg.bumps_max = 0;
    cfg.background = {0.5, 1.0, 2.0, 3.0, 0.25, 0.75, 1.5, 4.0, 0.1, 6.0};
    const World w = generate_world(cfg, 11);
    std::vector<double> sum(10, 0.0);
    double n = 0;
    for (const auto& cl : w.clusters)
        for (const auto& t : cl.tiles)
            for (const auto& st : t.subtiles) {
                for (std::size_t c = 0; c < 10; ++c) sum[c] += static_cast<double>(st.truth[c]);
                n += 1;
            }
    CHECK(n >= 1e4);
    for (std::size_t c = 0; c < 10; ++c) {
        CHECK(sum[c] / n == doctest::Approx(cfg.background[c]).epsilon(0.05));
    }
}

TEST_CASE("noiseless index is recoverable by least squares")
{
    auto cfg = testsupport::small_config(60);
    cfg.y_noise = 0.0;
    const World w = generate_world(cfg, 5);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(w.clusters.size()), 10);
    Eigen::VectorXd y(static_cast<Eigen::Index>(w.clusters.size()));
    for (std::size_t i = 0; i < w.clusters.size(); ++i) {
        const auto totals = w.clusters[i].total_truth();
        for (std::size_t c = 0; c < 10; ++c) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = static_cast<double>(totals[c]);
        y(static_cast<Eigen::Index>(i)) = w.clusters[i].y;
    }
    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    const Eigen::Map<const Eigen::VectorXd> truth(w.w_star().data(), 10);
    CHECK((beta - truth).norm() < 1e-6);
}

TEST_CASE("world file round trip and corruption handling")
{
    const World w = generate_world(testsupport::small_config(4), 9);
    const auto dir = std::filesystem::temp_directory_path() / "tiledrop_world_io";
    std::filesystem::create_directories(dir);
    const auto path = dir / "w.json";
    save_world(w, path);
    CHECK(load_world(path) == w);

    const std::string text = serialize_world(w);
    CHECK_THROWS_AS(parse_world(text.substr(0, text.size() / 2)), SchemaError);
    CHECK_THROWS_AS(load_world(dir / "missing.json"), IoError);

    SUBCASE("checksum mismatch")
    {
        auto doc = nlohmann::ordered_json::parse(text);
        doc["clusters"][0]["y"] = 123.0;
        CHECK_THROWS_AS(parse_world(doc.dump()), SchemaError);
    }
    SUBCASE("schema version")
    {
        auto doc = nlohmann::ordered_json::parse(text);
        doc["schema_version"] = 99;
        CHECK_THROWS_AS(parse_world(doc.dump()), SchemaError);
    }
    SUBCASE("L mismatch against header")
    {
        auto doc = nlohmann::ordered_json::parse(text);
        doc.erase("crc32");
        doc["L"] = 9;
        doc["crc32"] = crc32_hex(doc.dump());
        CHECK_THROWS_AS(parse_world(doc.dump()), ValidationError);
    }
    SUBCASE("count vector shorter than L")
    {
        auto doc = nlohmann::ordered_json::parse(text);
        doc.erase("crc32");
        doc["clusters"][1]["tiles"][3]["counts"][0].erase(0);
        doc["crc32"] = crc32_hex(doc.dump());
        CHECK_THROWS_AS(parse_world(doc.dump()), ValidationError);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("train/test split")
{
    const Split s = split_train_test(320, 0.2, 0);
    CHECK(s.train.size() == 256);
    CHECK(s.test.size() == 64);

    const Split a = split_train_test(10, 0.5, 4);
    const Split b = split_train_test(10, 0.5, 4);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);

    std::set<int> all(a.train.begin(), a.train.end());
    for (int id : a.test) CHECK(all.insert(id).second);
    CHECK(all.size() == 10);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 9);

    CHECK_THROWS_AS(split_train_test(4, 0.2, 0), ConfigError);
    CHECK_THROWS_AS(split_train_test(10, 0.0, 0), ConfigError);
    CHECK_THROWS_AS(split_train_test(10, 1.0, 0), ConfigError);
}

TEST_CASE("invalid generation configs are rejected")
{
    GenConfig c;
    c.grid = 0;
    CHECK_THROWS_AS(generate_world(c, 1), ConfigError);
    c = GenConfig{};
    c.num_clusters = 1;
    CHECK_THROWS_AS(generate_world(c, 1), ConfigError);
    c = GenConfig{};
    c.lr_noise = -1.0;
    CHECK_THROWS_AS(generate_world(c, 1), ConfigError);
    c = GenConfig{};
    c.class_amplitudes = {1.0, 2.0};
    CHECK_THROWS_AS(generate_world(c, 1), ConfigError);
    c = GenConfig{};
    c.max_jitter_km = 6.0;
    CHECK_THROWS_AS(generate_world(c, 1), ConfigError);
}
