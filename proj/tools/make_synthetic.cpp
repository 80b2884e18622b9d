// Writes the bundled synthetic market: five regime-switching assets plus an
// equal-weight index, as long-form OHLCV CSV on stdout.
#include <iostream>
#include <string>

#include "kdlab/market_data.hpp"
#include "kdlab/synthetic.hpp"

int main(int argc, char** argv) {
  kdlab::synthetic::RegimeParams p;
  if (argc > 1) p.seed = std::stoull(argv[1]);
  if (argc > 2) p.dates = std::stoull(argv[2]);
  kdlab::write_ohlcv_csv(kdlab::synthetic::regime_market(p), std::cout);
  return 0;
}
