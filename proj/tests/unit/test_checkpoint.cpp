#include "koopa/checkpoint.hpp"
#include "koopa/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace koopa;

namespace {

KoopaModel sample_model() {
    ModelConfig cfg;
    cfg.lookback = 12;
    cfg.horizon = 6;
    cfg.variates = 2;
    cfg.segment_len = 4;
    cfg.embed_dim = 5;
    cfg.blocks = 2;
    cfg.hidden_dim = 7;
    cfg.alpha = 0.25;
    cfg.k_inv_init_scale = 0.05;
    cfg.activation = nn::Activation::tanh;
    spectral::SpectrumMask mask;
    mask.window_length = 12;
    mask.kept = {0, 2, 5};
    mask.alpha = 0.25;
    KoopaModel m = KoopaModel::create(cfg, mask);
    m.scaler.mean = {1.5, -2.0};
    m.scaler.stddev = {0.5, 3.0};
    return m;
}

void expect_load_error(const std::string& bytes, const std::string& fragment) {
    try {
        deserialize_model(bytes);
        FAIL() << "expected IoError containing '" << fragment << "'";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

} // namespace

TEST(Checkpoint, RoundTripReproducesPredictions) {
    const KoopaModel m = sample_model();
    const auto path = std::filesystem::temp_directory_path() / "koopa_roundtrip.kpa";
    save_checkpoint(m, path.string());
    const KoopaModel back = load_checkpoint(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(back.config().to_key_values(), m.config().to_key_values());
    EXPECT_EQ(back.mask().kept, m.mask().kept);
    EXPECT_EQ(back.mask().alpha, m.mask().alpha);
    EXPECT_TRUE(back.inv_encoder == m.inv_encoder);
    EXPECT_TRUE(back.var_decoder == m.var_decoder);
    EXPECT_EQ(back.k_inv, m.k_inv);
    EXPECT_EQ(back.scaler.mean, m.scaler.mean);
    EXPECT_EQ(back.scaler.stddev, m.scaler.stddev);
    Rng rng(1);
    const Matrix x = koopa::testing::gaussian_matrix(rng, 12, 2);
    EXPECT_EQ(koopa_forward(back, x).prediction, koopa_forward(m, x).prediction);
    EXPECT_EQ(serialize_model(back), serialize_model(m));
}

TEST(Checkpoint, HeaderLayout) {
    const std::string bytes = serialize_model(sample_model());
    EXPECT_EQ(bytes.substr(0, 6), std::string("KOOPA\0", 6));
    EXPECT_EQ(static_cast<unsigned char>(bytes[6]), kCheckpointVersion);
    EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0);
    EXPECT_EQ(bytes.substr(8, 4), "CONF");
}

TEST(Checkpoint, RejectsTamperedFiles) {
    const std::string good = serialize_model(sample_model());
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    expect_load_error(bad_magic, "magic");
    std::string bad_version = good;
    bad_version[6] = 9;
    expect_load_error(bad_version, "version 9");
    expect_load_error(good.substr(0, good.size() - 3), "truncated");
    expect_load_error(good.substr(0, 4), "truncated");
    const std::size_t mask_at = good.find("MASK");
    const std::size_t parm_at = good.find("PARM");
    std::string no_mask = good.substr(0, mask_at) + good.substr(parm_at);
    expect_load_error(no_mask, "missing MASK section");
    std::string bad_conf = good;
    const std::size_t emb = bad_conf.find("model.embed_dim=5");
    ASSERT_NE(emb, std::string::npos);
    bad_conf[emb + 16] = '6';
    expect_load_error(bad_conf, "does not match");
    EXPECT_THROW(load_checkpoint("/nonexistent/model.kpa"), IoError);
}
