#ifndef FLOWLENS_FLOWLENS_HPP
#define FLOWLENS_FLOWLENS_HPP

#include "core_model.hpp"
#include "ingest.hpp"
#include "extraction.hpp"
#include "flow_analytics.hpp"
#include "glance_metrics.hpp"
#include "synth_generator.hpp"
#include "api_service.hpp"

#endif // FLOWLENS_FLOWLENS_HPP
