#include <catch2/catch_amalgamated.hpp>

#include "isf/sha256.hpp"

using namespace isf;

TEST_CASE("sha256 matches the reference vectors", "[sha256]") {
  CHECK(sha256_hex(std::string("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string(
            "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(sha256_hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256 incremental updates equal one-shot", "[sha256]") {
  const std::string msg = "the quick brown fox jumps over the lazy dog 12345";
  Sha256 h;
  for (char c : msg) h.update(&c, 1);
  auto d = h.digest();
  CHECK(Sha256::hex(d) == sha256_hex(msg));
}
