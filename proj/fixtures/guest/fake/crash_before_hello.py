from sdv.databroker import Client

Client()
