#include <gtest/gtest.h>

#include <cstring>

#include "json.hpp"
#include "maskexplain/error.hpp"
#include "maskexplain/model.hpp"
#include "support.hpp"

using namespace maskexplain;

namespace {

struct Parts {
  nlohmann::json manifest;
  std::string blob;
};

Parts split(const std::string& bytes) {
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 6, 4);
  return {nlohmann::json::parse(bytes.substr(10, len)), bytes.substr(10 + len)};
}

std::string join(const Parts& p) {
  const std::string m = p.manifest.dump();
  std::string out = "NMWT";
  out.push_back(1);
  out.push_back(0);
  const auto len = static_cast<std::uint32_t>(m.size());
  out.append(reinterpret_cast<const char*>(&len), 4);
  return out + m + p.blob;
}

ErrorCode decode_error(const std::string& bytes) {
  try {
    decode_model(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorCode::Io;
}

}  // namespace

TEST(ModelIo, RoundTripIsBitIdentical) {
  const Model model = maskexplain::testing::random_cnn(32, 5);
  const Model back = decode_model(encode_model(model));
  EXPECT_EQ(back.spec(), model.spec());
  EXPECT_EQ(back.weights(), model.weights());
  EXPECT_EQ(back.checksum(), model.checksum());
  EXPECT_EQ(encode_model(back), encode_model(model));
}

TEST(ModelIo, FileRoundTrip) {
  const auto dir = maskexplain::testing::scratch_dir("model_io");
  const Model model = maskexplain::testing::random_cnn(16, 6);
  save_model(model, dir / "m.nmwt");
  EXPECT_EQ(load_model(dir / "m.nmwt").weights(), model.weights());
  try {
    load_model(dir / "missing.nmwt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(ModelIo, TruncatedBlob) {
  const std::string bytes = encode_model(maskexplain::testing::random_cnn(16, 6));
  try {
    decode_model(bytes.substr(0, bytes.size() - 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BlobLengthMismatch);
    EXPECT_NE(std::string(e.what()).find("blob length disagreement"), std::string::npos);
  }
}

TEST(ModelIo, KernelSizeDisagreesWithBlob) {
  const auto spec5 = [] {
    ModelSpec s = tiny_cnn_spec(16, {"a", "b", "c"});
    std::get<Conv2dLayer>(s.layers[0]).kernel = 5;
    return s;
  }();
  Parts parts = split(encode_model(Model(spec5, init_weights(spec5, 1))));
  parts.manifest["model"]["layers"][0]["kernel"] = 3;
  try {
    decode_model(join(parts));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TensorShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("layer0.weight"), std::string::npos);
  }
}

TEST(ModelIo, HeaderErrors) {
  const std::string good = encode_model(maskexplain::testing::random_cnn(16, 6));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(decode_error(bad_magic), ErrorCode::BadMagic);
  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(decode_error(bad_version), ErrorCode::VersionMismatch);
  EXPECT_EQ(decode_error(good.substr(0, 7)), ErrorCode::Truncated);
  EXPECT_EQ(decode_error(good.substr(0, 40)), ErrorCode::Truncated);
  std::string extra = good + "junk";
  EXPECT_EQ(decode_error(extra), ErrorCode::BlobLengthMismatch);
}

TEST(ModelIo, UnknownLayerAttribute) {
  Parts parts = split(encode_model(maskexplain::testing::random_cnn(16, 6)));
  parts.manifest["model"]["layers"][0]["dilation"] = 2;
  EXPECT_EQ(decode_error(join(parts)), ErrorCode::ManifestInvalid);
}
