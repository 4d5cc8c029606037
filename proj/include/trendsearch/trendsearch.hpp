#pragma once

#include "trendsearch/date.hpp"
#include "trendsearch/error.hpp"
#include "trendsearch/label_models.hpp"
#include "trendsearch/series.hpp"
#include "trendsearch/rdp.hpp"
#include "trendsearch/trend_labeler.hpp"
#include "trendsearch/text.hpp"
#include "trendsearch/query_parser.hpp"
#include "trendsearch/search_index.hpp"
#include "trendsearch/sequence_search.hpp"
#include "trendsearch/facets.hpp"
#include "trendsearch/datastore.hpp"
#include "trendsearch/search_service.hpp"
